"""Relighting loss: log-compressed image differences under sampled point and
SG lighting conditions, plus per-map L1 terms weighted by lambda = 0.1.

Renders are local camera-space relighting of the maps against the normals;
point conditions place the light at the per-pixel mirror direction of the
sampled view vector so specular mismatches are always excited.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from numba import njit, prange

from .lights import SGLight
from .materials import MaterialMaps
from .shading import shade_core, shade_grad_core

LAMBDA_MAPS = 0.1
SG_SHARPNESS_RANGE = (5.0, 200.0)
SG_AMPLITUDE_RANGE = (0.5, 2.0)
SG_MIXTURE_SIZE = 5


@dataclass(frozen=True)
class LightingCondition:
    """One sampled relighting setup: a view vector plus either a mirror point
    light or a 5-lobe SG mixture."""

    view_dir: np.ndarray
    kind: str  # "point-mirror" | "sg-mixture"
    point_intensity: np.ndarray | None = None
    sg_lights: tuple[SGLight, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "view_dir", np.asarray(self.view_dir, dtype=np.float64))
        if self.kind == "point-mirror":
            if self.point_intensity is None or self.sg_lights is not None:
                raise ValueError("point-mirror condition needs exactly a point intensity")
            object.__setattr__(self, "point_intensity",
                               np.asarray(self.point_intensity, dtype=np.float64))
        elif self.kind == "sg-mixture":
            if self.sg_lights is None or self.point_intensity is not None:
                raise ValueError("sg-mixture condition needs exactly SG lobes")
            if len(self.sg_lights) != SG_MIXTURE_SIZE:
                raise ValueError(f"sg mixture must have {SG_MIXTURE_SIZE} lobes")
        else:
            raise ValueError(f"unknown condition kind {self.kind!r}")


def log_compress(image: np.ndarray) -> np.ndarray:
    """Per-channel v -> log(0.1 + v)."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.size and arr.min() < 0.0:
        raise ValueError("log_compress requires non-negative input")
    return np.log(0.1 + arr)


def _frame(base: np.ndarray) -> np.ndarray:
    """Orthonormal basis (t, b, base) as rows of a 3x3 matrix."""
    a = np.array([1.0, 0.0, 0.0]) if abs(base[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t = np.cross(base, a)
    t /= np.linalg.norm(t)
    b = np.cross(base, t)
    return np.stack([t, b, base])


def sample_hemisphere_cosine(rng: np.random.Generator, base, n: int) -> np.ndarray:
    """Cosine-weighted directions on the hemisphere around base, (n, 3)."""
    base = np.asarray(base, dtype=np.float64)
    frame = _frame(base)
    u1 = rng.random(n)
    u2 = rng.random(n)
    cz = np.sqrt(u1)
    sz = np.sqrt(1.0 - u1)
    phi = 2.0 * math.pi * u2
    local = np.stack([sz * np.cos(phi), sz * np.sin(phi), cz], axis=1)
    return local @ frame


def sample_hemisphere_uniform(rng: np.random.Generator, base, n: int) -> np.ndarray:
    """Area-uniform directions on the hemisphere around base, (n, 3)."""
    base = np.asarray(base, dtype=np.float64)
    frame = _frame(base)
    cz = rng.random(n)
    sz = np.sqrt(1.0 - cz * cz)
    phi = 2.0 * math.pi * rng.random(n)
    local = np.stack([sz * np.cos(phi), sz * np.sin(phi), cz], axis=1)
    return local @ frame


def sample_conditions(rng: np.random.Generator, base_view,
                      n_point: int = 3, n_sg: int = 3) -> list[LightingCondition]:
    """n_point mirror-light conditions and n_sg five-lobe SG conditions, with
    view vectors cosine-sampled around base_view."""
    base = np.asarray(base_view, dtype=np.float64)
    conditions: list[LightingCondition] = []
    views = sample_hemisphere_cosine(rng, base, n_point)
    for i in range(n_point):
        conditions.append(LightingCondition(
            view_dir=views[i], kind="point-mirror",
            point_intensity=np.ones(3)))
    for _ in range(n_sg):
        view = sample_hemisphere_cosine(rng, base, 1)[0]
        axes = sample_hemisphere_uniform(rng, base, SG_MIXTURE_SIZE)
        sharps = rng.uniform(*SG_SHARPNESS_RANGE, SG_MIXTURE_SIZE)
        amps = rng.uniform(*SG_AMPLITUDE_RANGE, (SG_MIXTURE_SIZE, 3))
        lobes = tuple(SGLight(axes[j], float(sharps[j]), amps[j])
                      for j in range(SG_MIXTURE_SIZE))
        conditions.append(LightingCondition(view_dir=view, kind="sg-mixture",
                                            sg_lights=lobes))
    return conditions


class MapLoss(NamedTuple):
    diffuse: float
    roughness: float
    specular: float


def map_loss(pred: MaterialMaps, gt: MaterialMaps) -> MapLoss:
    """Mean absolute difference over valid pixels, per map."""
    if pred.resolution != gt.resolution:
        raise ValueError("map resolutions differ")
    mask = pred.mask & gt.mask
    if not mask.any():
        return MapLoss(0.0, 0.0, 0.0)
    d = float(np.abs(pred.diffuse[mask].astype(np.float64)
                     - gt.diffuse[mask].astype(np.float64)).mean())
    r = float(np.abs(pred.roughness[mask].astype(np.float64)
                     - gt.roughness[mask].astype(np.float64)).mean())
    s = float(np.abs(pred.specular[mask].astype(np.float64)
                     - gt.specular[mask].astype(np.float64)).mean())
    return MapLoss(d, r, s)


def _condition_arrays(cond: LightingCondition):
    if cond.kind == "sg-mixture":
        axes = np.ascontiguousarray([g.axis for g in cond.sg_lights])
        sharp = np.asarray([g.sharpness for g in cond.sg_lights], dtype=np.float64)
        amp = np.ascontiguousarray([g.amplitude for g in cond.sg_lights])
        return np.zeros(3), axes, sharp, amp, False
    return cond.point_intensity, np.zeros((0, 3)), np.zeros(0), np.zeros((0, 3)), True


@njit(cache=True, parallel=True)
def _render_kernel(diffuse, specular, roughness, normals, mask, view_dir,
                   mirror, point_intensity, sg_axes, sg_sharp, sg_amp):
    h, w = mask.shape
    out = np.zeros((h, w, 3))
    for idx in prange(h * w):
        y = idx // w
        x = idx % w
        if not mask[y, x]:
            continue
        n = normals[y, x]
        nv = n[0] * view_dir[0] + n[1] * view_dir[1] + n[2] * view_dir[2]
        if mirror and nv > 0.0:
            pl_dirs = np.empty((1, 3))
            pl_dirs[0, 0] = 2.0 * nv * n[0] - view_dir[0]
            pl_dirs[0, 1] = 2.0 * nv * n[1] - view_dir[1]
            pl_dirs[0, 2] = 2.0 * nv * n[2] - view_dir[2]
            pl_rgb = point_intensity.reshape(1, 3)
        else:
            pl_dirs = np.zeros((0, 3))
            pl_rgb = np.zeros((0, 3))
        r, g, b = shade_core(diffuse[y, x], specular[y, x], roughness[y, x],
                             n, view_dir, pl_dirs, pl_rgb,
                             sg_axes, sg_sharp, sg_amp)
        out[y, x, 0] = r
        out[y, x, 1] = g
        out[y, x, 2] = b
    return out


def render_condition(maps: MaterialMaps, normals: np.ndarray,
                     cond: LightingCondition) -> np.ndarray:
    """Relight the maps under one condition; invalid pixels render black."""
    intensity, axes, sharp, amp, mirror = _condition_arrays(cond)
    return _render_kernel(maps.diffuse.astype(np.float64),
                          maps.specular.astype(np.float64),
                          maps.roughness.astype(np.float64),
                          np.ascontiguousarray(normals, dtype=np.float64),
                          maps.mask, cond.view_dir,
                          mirror, intensity, axes, sharp, amp)


def rendering_term(pred: MaterialMaps, gt: MaterialMaps, normals: np.ndarray,
                   conditions: Sequence[LightingCondition]) -> float:
    """Mean over conditions of the L1 between log-compressed renders."""
    if not conditions:
        raise ValueError("conditions must be non-empty")
    mask = pred.mask & gt.mask
    total = 0.0
    for cond in conditions:
        a = log_compress(render_condition(pred, normals, cond))
        b = log_compress(render_condition(gt, normals, cond))
        total += float(np.abs(a - b)[mask].mean()) if mask.any() else 0.0
    return total / len(conditions)


def total_loss(pred: MaterialMaps, gt: MaterialMaps, normals: np.ndarray,
               conditions: Sequence[LightingCondition],
               lam: float = LAMBDA_MAPS,
               perceptual: Callable[[np.ndarray, np.ndarray], float] | None = None) -> float:
    """rendering_term + lam * (L1(D) + L1(R) + L1(S)), optionally plus a
    pluggable per-image metric applied to the renders and the maps."""
    ml = map_loss(pred, gt)
    value = rendering_term(pred, gt, normals, conditions) \
        + lam * (ml.diffuse + ml.roughness + ml.specular)
    if perceptual is not None:
        acc = 0.0
        for cond in conditions:
            acc += perceptual(render_condition(pred, normals, cond),
                              render_condition(gt, normals, cond))
        value += acc / len(conditions)
        value += perceptual(pred.diffuse, gt.diffuse)
        value += perceptual(np.repeat(pred.roughness[:, :, None], 3, axis=2),
                            np.repeat(gt.roughness[:, :, None], 3, axis=2))
        value += perceptual(pred.specular, gt.specular)
    return value


@njit(cache=True, parallel=True)
def _render_grad_kernel(diffuse, specular, roughness, normals, mask, view_dir,
                        mirror, point_intensity, sg_axes, sg_sharp, sg_amp,
                        gt_log, inv_norm, grad_d, grad_s, grad_r):
    """Accumulate d/dparams of mean |log render - gt_log| into grad buffers."""
    h, w = mask.shape
    for idx in prange(h * w):
        y = idx // w
        x = idx % w
        if not mask[y, x]:
            continue
        n = normals[y, x]
        nv = n[0] * view_dir[0] + n[1] * view_dir[1] + n[2] * view_dir[2]
        if mirror and nv > 0.0:
            pl_dirs = np.empty((1, 3))
            pl_dirs[0, 0] = 2.0 * nv * n[0] - view_dir[0]
            pl_dirs[0, 1] = 2.0 * nv * n[1] - view_dir[1]
            pl_dirs[0, 2] = 2.0 * nv * n[2] - view_dir[2]
            pl_rgb = point_intensity.reshape(1, 3)
        else:
            pl_dirs = np.zeros((0, 3))
            pl_rgb = np.zeros((0, 3))
        res = shade_grad_core(diffuse[y, x], specular[y, x], roughness[y, x],
                              n, view_dir, pl_dirs, pl_rgb,
                              sg_axes, sg_sharp, sg_amp)
        for c in range(3):
            value = res[c]
            delta = math.log(0.1 + value) - gt_log[y, x, c]
            if delta > 0.0:
                sgn = 1.0
            elif delta < 0.0:
                sgn = -1.0
            else:
                sgn = 0.0
            scale = sgn * inv_norm / (0.1 + value)
            grad_d[y, x, c] += scale * res[3 + c]
            grad_s[y, x, c] += scale * res[6 + c]
            grad_r[y, x] += scale * res[9 + c]


def total_loss_gradient(pred: MaterialMaps, gt: MaterialMaps, normals: np.ndarray,
                        conditions: Sequence[LightingCondition],
                        lam: float = LAMBDA_MAPS):
    """(loss, dD (H,W,3), dS (H,W,3), dR (H,W)) for the default L1 loss.

    Partials are with respect to each valid texel's own parameters.
    """
    mask = pred.mask & gt.mask
    n_valid = int(mask.sum())
    h, w = mask.shape
    grad_d = np.zeros((h, w, 3))
    grad_s = np.zeros((h, w, 3))
    grad_r = np.zeros((h, w))
    if n_valid == 0:
        return 0.0, grad_d, grad_s, grad_r
    normals64 = np.ascontiguousarray(normals, dtype=np.float64)
    pd = pred.diffuse.astype(np.float64)
    ps = pred.specular.astype(np.float64)
    pr = pred.roughness.astype(np.float64)
    inv_norm = 1.0 / (len(conditions) * n_valid * 3)
    for cond in conditions:
        intensity, axes, sharp, amp, mirror = _condition_arrays(cond)
        gt_log = log_compress(render_condition(gt, normals64, cond))
        _render_grad_kernel(pd, ps, pr, normals64, mask, cond.view_dir,
                            mirror, intensity, axes, sharp, amp,
                            gt_log, inv_norm, grad_d, grad_s, grad_r)
    # lambda * L1 map terms: d/dx mean|x - y| = sign/n per element
    m3 = mask[:, :, None]
    grad_d += lam * np.where(m3, np.sign(pd - gt.diffuse), 0.0) / (n_valid * 3)
    grad_s += lam * np.where(m3, np.sign(ps - gt.specular), 0.0) / (n_valid * 3)
    grad_r += lam * np.where(mask, np.sign(pr - gt.roughness), 0.0) / n_valid
    loss = total_loss(pred, gt, normals64, conditions, lam=lam)
    return loss, grad_d, grad_s, grad_r
