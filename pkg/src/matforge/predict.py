"""Per-view material prediction from feature stacks.

Fills the estimation slot with two interchangeable predictors sharing one
contract (stacks in, three maps out): a color-statistics heuristic, and an
inverse-rendering optimizer that needs the lights to be known. A learned
predictor can be slotted in behind the same interface later.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from numba import njit, prange

from .lights import PointLight, SGLight
from .materials import MIN_ROUGHNESS, MaterialMaps, clamp_maps
from .shading import shade_core, shade_grad_core
from .viewstats import (FeatureStack, PackedViews, ViewData, build_feature_stacks,
                        compute_view_data, unpreprocess_dynamic_range)

if TYPE_CHECKING:
    from .scene import SceneDescription

# spread of 1 (radiance swing over the selected views equal to full scale)
# saturates the specular estimate; roughness falls off a bit faster
SPECULAR_PER_SPREAD = 0.5
ROUGHNESS_PER_SPREAD = 0.8

_LUMA = np.array([0.2126, 0.7152, 0.0722])


@dataclass(frozen=True)
class PredictorConfig:
    mode: str = "heuristic"            # "heuristic" | "optimize"
    iterations: int = 200
    step_size: float = 0.02
    seed: int = 0
    light_model: tuple[tuple[PointLight, ...], tuple[SGLight, ...]] | None = None
    backtracking: bool = False
    early_stop: float = 1e-7

    def __post_init__(self):
        if self.mode not in ("heuristic", "optimize"):
            raise ValueError(f"unknown predictor mode {self.mode!r}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.mode == "optimize" and self.light_model is None:
            raise ValueError("optimize mode requires a known light model")

    @classmethod
    def from_dict(cls, cfg: dict, lights=None) -> "PredictorConfig":
        return cls(
            mode=cfg.get("mode", "heuristic"),
            iterations=int(cfg.get("iterations", 200)),
            step_size=float(cfg.get("step_size", 0.02)),
            seed=int(cfg.get("seed", 0)),
            light_model=lights,
            backtracking=bool(cfg.get("backtracking", False)),
            early_stop=float(cfg.get("early_stop", 1e-7)),
        )


def heuristic_predict(stacks: tuple[FeatureStack, FeatureStack]) -> MaterialMaps:
    """Median -> diffuse; max-min luminance spread -> specular and roughness."""
    diffuse_stack, specular_stack = stacks
    mask = diffuse_stack.mask & specular_stack.mask
    median = unpreprocess_dynamic_range(diffuse_stack.group("median"))
    highs = unpreprocess_dynamic_range(specular_stack.group("max"))
    lows = unpreprocess_dynamic_range(specular_stack.group("min"))
    spread = np.clip(highs - lows, 0.0, None) @ _LUMA
    specular = np.repeat(np.clip(SPECULAR_PER_SPREAD * spread, 0.0, 1.0)[:, :, None],
                         3, axis=2)
    roughness = np.clip(1.0 - ROUGHNESS_PER_SPREAD * spread, MIN_ROUGHNESS, 1.0)
    return clamp_maps(median, specular, roughness, mask)


@njit(cache=True, inline="always")
def _pixel_loss(d, s, alpha, n, obs_color, obs_dir, nobs,
                pl_dirs, pl_rgb, sg_axes, sg_sharp, sg_amp):
    acc = 0.0
    for k in range(nobs):
        r, g, b = shade_core(d, s, alpha, n, obs_dir[k], pl_dirs, pl_rgb,
                             sg_axes, sg_sharp, sg_amp)
        acc += abs(math.log(0.1 + r) - math.log(0.1 + obs_color[k, 0]))
        acc += abs(math.log(0.1 + g) - math.log(0.1 + obs_color[k, 1]))
        acc += abs(math.log(0.1 + b) - math.log(0.1 + obs_color[k, 2]))
    return acc / (3.0 * nobs)


@njit(cache=True)
def _pixel_loss_grad(d, s, alpha, n, obs_color, obs_dir, nobs,
                     pl_dirs, pl_rgb, sg_axes, sg_sharp, sg_amp, grad):
    """Loss plus d/d(d0,d1,d2,s0,s1,s2,alpha) written into grad[0:7]."""
    for i in range(7):
        grad[i] = 0.0
    acc = 0.0
    inv = 1.0 / (3.0 * nobs)
    for k in range(nobs):
        res = shade_grad_core(d, s, alpha, n, obs_dir[k], pl_dirs, pl_rgb,
                              sg_axes, sg_sharp, sg_amp)
        for c in range(3):
            delta = math.log(0.1 + res[c]) - math.log(0.1 + obs_color[k, c])
            acc += abs(delta)
            if delta > 0.0:
                sgn = 1.0
            elif delta < 0.0:
                sgn = -1.0
            else:
                sgn = 0.0
            scale = sgn * inv / (0.1 + res[c])
            grad[c] += scale * res[3 + c]
            grad[3 + c] += scale * res[6 + c]
            grad[6] += scale * res[9 + c]
    return acc * inv


@njit(cache=True, parallel=True)
def _optimize_kernel(obs_color, obs_dir, obs_count, normals, valid,
                     pl_dirs, pl_rgb, sg_axes, sg_sharp, sg_amp,
                     init_d, init_s, init_r,
                     iterations, step, early_stop, backtracking,
                     trace_slot, trace):
    beta1 = 0.9
    beta2 = 0.999
    eps = 1e-8
    height, width = valid.shape
    out_d = init_d.copy()
    out_s = init_s.copy()
    out_r = init_r.copy()
    out_loss = np.full((height, width), np.nan)
    optimized = np.zeros((height, width), dtype=np.uint8)
    for idx in prange(height * width):
        y = idx // width
        x = idx % width
        nobs = obs_count[y, x]
        if not valid[y, x] or nobs < 1:
            continue
        optimized[y, x] = 1
        n = normals[y, x]
        p = np.empty(7)
        for c in range(3):
            p[c] = init_d[y, x, c]
            p[3 + c] = init_s[y, x, c]
        p[6] = init_r[y, x]
        m = np.zeros(7)
        v2 = np.zeros(7)
        grad = np.empty(7)
        cand = np.empty(7)
        slot = trace_slot[y, x]
        loss = _pixel_loss_grad(p[0:3], p[3:6], p[6], n, obs_color[y, x],
                                obs_dir[y, x], nobs, pl_dirs[y, x],
                                pl_rgb[y, x], sg_axes, sg_sharp, sg_amp, grad)
        t = 1
        while t <= iterations:
            if slot >= 0:
                trace[slot, t - 1] = loss
            if loss <= early_stop:
                break
            bc1 = 1.0 - beta1 ** t
            bc2 = 1.0 - beta2 ** t
            for i in range(7):
                m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i]
                v2[i] = beta2 * v2[i] + (1.0 - beta2) * grad[i] * grad[i]
            scale = 1.0
            accepted = True
            for attempt in range(9):
                for i in range(7):
                    upd = p[i] - scale * step * (m[i] / bc1) / (math.sqrt(v2[i] / bc2) + eps)
                    if i < 6:
                        cand[i] = min(max(upd, 0.0), 1.0)
                    else:
                        cand[i] = min(max(upd, MIN_ROUGHNESS), 1.0)
                if not backtracking:
                    break
                closs = _pixel_loss(cand[0:3], cand[3:6], cand[6], n,
                                    obs_color[y, x], obs_dir[y, x], nobs,
                                    pl_dirs[y, x], pl_rgb[y, x],
                                    sg_axes, sg_sharp, sg_amp)
                if closs <= loss:
                    break
                scale *= 0.5
                if attempt == 8:
                    accepted = False
            if accepted:
                for i in range(7):
                    p[i] = cand[i]
                loss = _pixel_loss_grad(p[0:3], p[3:6], p[6], n, obs_color[y, x],
                                        obs_dir[y, x], nobs, pl_dirs[y, x],
                                        pl_rgb[y, x], sg_axes, sg_sharp, sg_amp,
                                        grad)
            t += 1
        if slot >= 0:
            for i in range(t - 1, iterations + 1):
                trace[slot, i] = loss
        for c in range(3):
            out_d[y, x, c] = p[c]
            out_s[y, x, c] = p[3 + c]
        out_r[y, x] = p[6]
        out_loss[y, x] = loss
    return out_d, out_s, out_r, out_loss, optimized


def sg_light_arrays(sg_lights) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    axes = np.ascontiguousarray([g.axis for g in sg_lights]).reshape(-1, 3)
    sharp = np.asarray([g.sharpness for g in sg_lights], dtype=np.float64)
    amp = np.ascontiguousarray([g.amplitude for g in sg_lights]).reshape(-1, 3)
    return axes, sharp, amp


def optimize_materials(data: ViewData, lights, init: MaterialMaps,
                       cfg: PredictorConfig, scene: "SceneDescription",
                       trace_pixels=None):
    """Per-pixel adaptive-moment descent on the observation L1 in log space.

    lights: (point_lights, sg_lights). Pixels with no observations keep their
    init values and are flagged invalid. Returns (maps, per-pixel loss,
    traces) where traces is (len(trace_pixels), iterations + 1) or None.
    """
    from .render import point_light_fields

    point_lights, sgl = lights
    pl_dirs, pl_rgb = point_light_fields(scene.mesh, point_lights,
                                         data.positions, data.valid,
                                         scene.visibility_bias)
    sg_axes, sg_sharp, sg_amp = sg_light_arrays(sgl)
    h, w = data.valid.shape
    trace_slot = np.full((h, w), -1, dtype=np.int32)
    if trace_pixels:
        for i, (ty, tx) in enumerate(trace_pixels):
            trace_slot[ty, tx] = i
        trace = np.zeros((len(trace_pixels), cfg.iterations + 1))
    else:
        trace = np.zeros((0, cfg.iterations + 1))
    out_d, out_s, out_r, out_loss, optimized = _optimize_kernel(
        data.obs_color, data.obs_dir, data.obs_count,
        np.ascontiguousarray(data.normals), data.valid,
        pl_dirs, pl_rgb, sg_axes, sg_sharp, sg_amp,
        init.diffuse.astype(np.float64), init.specular.astype(np.float64),
        init.roughness.astype(np.float64),
        cfg.iterations, cfg.step_size, cfg.early_stop, cfg.backtracking,
        trace_slot, trace)
    maps = clamp_maps(out_d, out_s, out_r, data.valid & (optimized > 0))
    return maps, out_loss, (trace if trace_pixels else None)


def predict_view(scene: "SceneDescription", view_id: int, cfg: PredictorConfig,
                 data: ViewData | None = None,
                 packed: PackedViews | None = None) -> MaterialMaps:
    """Dispatch to the heuristic or the optimizer (heuristic used as init)."""
    if data is None:
        data = compute_view_data(scene, view_id, packed=packed)
    stacks = build_feature_stacks(scene, view_id, data=data)
    maps = heuristic_predict(stacks)
    if cfg.mode == "heuristic":
        return maps
    maps, _, _ = optimize_materials(data, cfg.light_model, maps, cfg, scene)
    return maps
