"""Per-pixel view ranking, color statistics, and feature stacks.

Views are ranked per surface point by cost = (1 - cos alpha) + d/d_max where
alpha is the angle between the surface normal and the direction to the
camera; the best 12 visible views feed per-channel min/median/max statistics.
Candidates facing away (cos alpha < 0) are filtered first, and d_max is the
maximum camera distance among the surviving candidates for that point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from numba import njit, prange

from .reproject import Observation, SurfacePoint, gather_observations, observe_core, view_geometry

if TYPE_CHECKING:
    from .scene import SceneDescription

TOP_K = 12
LOG_OFFSET = 0.1
VALUE_CAP = 10.0
_LOG_LO = math.log(LOG_OFFSET)
_LOG_HI = math.log(LOG_OFFSET + VALUE_CAP)


@dataclass(frozen=True)
class PixelStats:
    min: np.ndarray     # (3,)
    median: np.ndarray  # (3,)
    max: np.ndarray     # (3,)
    count: int

    @property
    def valid(self) -> bool:
        return self.count > 0


@dataclass(frozen=True)
class FeatureStack:
    """Spatially aligned named plane groups, 3 channels per group."""

    planes: np.ndarray        # (H, W, 3 * len(groups)) float32
    groups: tuple[str, ...]
    mask: np.ndarray          # (H, W) bool

    def __post_init__(self):
        if self.planes.shape[2] != 3 * len(self.groups):
            raise ValueError("plane count does not match group names")

    @property
    def num_planes(self) -> int:
        return self.planes.shape[2]

    def group(self, name: str) -> np.ndarray:
        i = self.groups.index(name)
        return self.planes[:, :, 3 * i:3 * i + 3]


def view_cost(alpha: float, d_ip: float, d_max: float) -> float:
    """Ranking cost of one candidate view; lower is better, range [0, 2]."""
    if d_max <= 0.0:
        raise ValueError("d_max must be positive (no candidate views)")
    return (1.0 - math.cos(alpha)) + d_ip / d_max


def select_views(scene: "SceneDescription", point: SurfacePoint, k: int = TOP_K) -> list[int]:
    """The <= k visible, front-facing views with smallest cost, ascending.

    Ties break toward the lower view_id. Reference implementation; the
    per-view kernel path must match it exactly.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    obs = gather_observations(scene, point)
    cands = [(o, float(point.normal @ o.view_dir)) for o in obs]
    cands = [(o, ca) for o, ca in cands if ca >= 0.0]
    if not cands:
        return []
    d_max = max(o.distance for o, _ in cands)
    ranked = sorted(cands, key=lambda oc: ((1.0 - oc[1]) + oc[0].distance / d_max,
                                           oc[0].view_id))
    return [o.view_id for o, _ in ranked[:k]]


def color_statistics(observations, selected=None) -> PixelStats:
    """Per-channel min/median/max over the selected observation colors.

    observations: (n, 3) colors, or a list of Observation. selected: optional
    index subset. Even counts use the midpoint average per channel.
    """
    if len(observations) and isinstance(observations[0], Observation):
        colors = np.asarray([o.color for o in observations], dtype=np.float64)
    else:
        colors = np.asarray(observations, dtype=np.float64).reshape(-1, 3)
    if selected is not None:
        colors = colors[np.asarray(selected, dtype=np.int64)]
    n = len(colors)
    if n == 0:
        nan = np.full(3, np.nan)
        return PixelStats(min=nan, median=nan.copy(), max=nan.copy(), count=0)
    srt = np.sort(colors, axis=0)
    if n % 2:
        med = srt[n // 2].copy()
    else:
        med = 0.5 * (srt[n // 2 - 1] + srt[n // 2])
    return PixelStats(min=srt[0].copy(), median=med, max=srt[-1].copy(), count=n)


def preprocess_dynamic_range(plane: np.ndarray) -> np.ndarray:
    """log(0.1 + v), then the fixed interval [log 0.1, log 10.1] -> [-1, 1].

    Values above the cap (10) clamp to 1; scene-independent and invertible
    below the cap.
    """
    arr = np.asarray(plane, dtype=np.float64)
    if arr.size and arr.min() < 0.0:
        raise ValueError("preprocess_dynamic_range requires non-negative input")
    out = np.log(LOG_OFFSET + np.minimum(arr, VALUE_CAP))
    return -1.0 + 2.0 * (out - _LOG_LO) / (_LOG_HI - _LOG_LO)


def unpreprocess_dynamic_range(plane: np.ndarray) -> np.ndarray:
    """Inverse of preprocess_dynamic_range on [-1, 1]."""
    arr = np.asarray(plane, dtype=np.float64)
    return np.exp(_LOG_LO + (arr + 1.0) * 0.5 * (_LOG_HI - _LOG_LO)) - LOG_OFFSET


# ---------------------------------------------------------------------------
# batch path

@dataclass(frozen=True)
class PackedViews:
    """Scene cameras and images stacked for the compiled kernels."""

    rotations: np.ndarray    # (N, 3, 3)
    translations: np.ndarray  # (N, 3)
    centers: np.ndarray      # (N, 3)
    focals: np.ndarray       # (N, 2)
    principals: np.ndarray   # (N, 2)
    sizes: np.ndarray        # (N, 2) float (w, h)
    images: np.ndarray       # (N, Hmax, Wmax, 3) float64
    masks: np.ndarray        # (N, Hmax, Wmax) bool


def pack_views(scene: "SceneDescription") -> PackedViews:
    n = scene.num_views
    hmax = max(img.height for img in scene.images)
    wmax = max(img.width for img in scene.images)
    images = np.zeros((n, hmax, wmax, 3), dtype=np.float64)
    masks = np.zeros((n, hmax, wmax), dtype=bool)
    for i, img in enumerate(scene.images):
        images[i, :img.height, :img.width] = img.pixels
        masks[i, :img.height, :img.width] = img.mask
    return PackedViews(
        rotations=np.ascontiguousarray([c.rotation for c in scene.cameras]),
        translations=np.ascontiguousarray([c.translation for c in scene.cameras]),
        centers=np.ascontiguousarray([c.center for c in scene.cameras]),
        focals=np.asarray([c.focal for c in scene.cameras], dtype=np.float64),
        principals=np.asarray([c.principal for c in scene.cameras], dtype=np.float64),
        sizes=np.asarray([c.resolution for c in scene.cameras], dtype=np.float64),
        images=images,
        masks=masks,
    )


@njit(cache=True, parallel=True)
def _gather_stats_kernel(bmin, bmax, left, right, start, count_, order, v0, e1, e2,
                         rots, transs, centers, focals, principals, sizes,
                         images, masks, positions, normals, valid, k, bias):
    height, width = valid.shape
    nviews = rots.shape[0]
    obs_color = np.zeros((height, width, k, 3))
    obs_dir = np.zeros((height, width, k, 3))
    obs_view = np.full((height, width, k), -1, dtype=np.int32)
    obs_count = np.zeros((height, width), dtype=np.int32)
    smin = np.zeros((height, width, 3))
    smed = np.zeros((height, width, 3))
    smax = np.zeros((height, width, 3))
    for idx in prange(height * width):
        y = idx // width
        x = idx % width
        if not valid[y, x]:
            continue
        px = positions[y, x, 0]
        py = positions[y, x, 1]
        pz = positions[y, x, 2]
        nx = normals[y, x, 0]
        ny = normals[y, x, 1]
        nz = normals[y, x, 2]
        cand_color = np.empty((nviews, 3))
        cand_dir = np.empty((nviews, 3))
        cand_dist = np.empty(nviews)
        cand_cos = np.empty(nviews)
        cand_view = np.empty(nviews, dtype=np.int32)
        nc = 0
        d_max = 0.0
        for view in range(nviews):
            ok, r, g, b, dx, dy, dz, dist = observe_core(
                bmin, bmax, left, right, start, count_, order, v0, e1, e2,
                rots[view], transs[view], centers[view],
                focals[view, 0], focals[view, 1],
                principals[view, 0], principals[view, 1],
                sizes[view, 0], sizes[view, 1],
                images[view], masks[view], px, py, pz, bias)
            if not ok:
                continue
            ca = nx * dx + ny * dy + nz * dz
            if ca < 0.0:
                continue
            cand_color[nc, 0] = r
            cand_color[nc, 1] = g
            cand_color[nc, 2] = b
            cand_dir[nc, 0] = dx
            cand_dir[nc, 1] = dy
            cand_dir[nc, 2] = dz
            cand_dist[nc] = dist
            cand_cos[nc] = ca
            cand_view[nc] = view
            nc += 1
            if dist > d_max:
                d_max = dist
        if nc == 0:
            continue
        cost = np.empty(nc)
        for i in range(nc):
            cost[i] = (1.0 - cand_cos[i]) + cand_dist[i] / d_max
        m = k if nc > k else nc
        for slot in range(m):
            best = slot
            for i in range(slot + 1, nc):
                if cost[i] < cost[best] or (cost[i] == cost[best]
                                            and cand_view[i] < cand_view[best]):
                    best = i
            if best != slot:
                cost[slot], cost[best] = cost[best], cost[slot]
                cand_view[slot], cand_view[best] = cand_view[best], cand_view[slot]
                for c in range(3):
                    cand_color[slot, c], cand_color[best, c] = \
                        cand_color[best, c], cand_color[slot, c]
                    cand_dir[slot, c], cand_dir[best, c] = \
                        cand_dir[best, c], cand_dir[slot, c]
                cand_dist[slot], cand_dist[best] = cand_dist[best], cand_dist[slot]
        obs_count[y, x] = m
        for slot in range(m):
            obs_view[y, x, slot] = cand_view[slot]
            for c in range(3):
                obs_color[y, x, slot, c] = cand_color[slot, c]
                obs_dir[y, x, slot, c] = cand_dir[slot, c]
        buf = np.empty(m)
        for c in range(3):
            for i in range(m):
                buf[i] = obs_color[y, x, i, c]
            for i in range(1, m):
                key = buf[i]
                j = i - 1
                while j >= 0 and buf[j] > key:
                    buf[j + 1] = buf[j]
                    j -= 1
                buf[j + 1] = key
            smin[y, x, c] = buf[0]
            smax[y, x, c] = buf[m - 1]
            if m % 2 == 1:
                smed[y, x, c] = buf[m // 2]
            else:
                smed[y, x, c] = 0.5 * (buf[m // 2 - 1] + buf[m // 2])
    return obs_color, obs_dir, obs_view, obs_count, smin, smed, smax


@dataclass(frozen=True)
class ViewData:
    """Everything the predictors need about one view, in radiance space."""

    view_id: int
    valid: np.ndarray       # (H, W) geometry + >=1 observation
    positions: np.ndarray   # (H, W, 3) world
    normals: np.ndarray     # (H, W, 3) world, unit on valid
    depth: np.ndarray       # (H, W) camera-space z
    obs_color: np.ndarray   # (H, W, K, 3)
    obs_dir: np.ndarray     # (H, W, K, 3) unit, toward camera
    obs_view: np.ndarray    # (H, W, K) int32, -1 padding
    obs_count: np.ndarray   # (H, W) int32
    stat_min: np.ndarray    # (H, W, 3)
    stat_median: np.ndarray
    stat_max: np.ndarray


def compute_view_data(scene: "SceneDescription", view_id: int,
                      packed: PackedViews | None = None, k: int = TOP_K) -> ViewData:
    if packed is None:
        packed = pack_views(scene)
    cam = scene.cameras[view_id]
    positions, normals, _tri, depth, geom_valid, _bary = view_geometry(scene.mesh, cam)
    (obs_color, obs_dir, obs_view, obs_count, smin, smed, smax) = _gather_stats_kernel(
        *scene.mesh.bvh.arrays(),
        packed.rotations, packed.translations, packed.centers,
        packed.focals, packed.principals, packed.sizes,
        packed.images, packed.masks,
        positions, normals, geom_valid, k, scene.visibility_bias)
    return ViewData(
        view_id=view_id,
        valid=geom_valid & (obs_count > 0),
        positions=positions,
        normals=normals,
        depth=depth,
        obs_color=obs_color,
        obs_dir=obs_dir,
        obs_view=obs_view,
        obs_count=obs_count,
        stat_min=smin,
        stat_median=smed,
        stat_max=smax,
    )


def build_feature_stacks(scene: "SceneDescription", view_id: int,
                         data: ViewData | None = None,
                         packed: PackedViews | None = None):
    """(diffuse_stack, specular_stack) for one view.

    Diffuse track: input, median, max (9 planes). Specular track adds min,
    camera-space normal in [-1, 1], and depth normalized by the scene
    diagonal then log-compressed like the colors (18 planes).
    """
    if data is None:
        data = compute_view_data(scene, view_id, packed=packed)
    cam = scene.cameras[view_id]
    img = scene.images[view_id]
    mask = data.valid
    inp = preprocess_dynamic_range(np.where(img.mask[:, :, None], img.pixels, 0.0))
    med = preprocess_dynamic_range(data.stat_median)
    mx = preprocess_dynamic_range(data.stat_max)
    mn = preprocess_dynamic_range(data.stat_min)
    n_cam = data.normals @ cam.rotation.T
    depth_planes = preprocess_dynamic_range(
        np.clip(data.depth, 0.0, None) / scene.mesh.diagonal)
    depth3 = np.repeat(depth_planes[:, :, None], 3, axis=2)
    zero_fill = ~mask[:, :, None]

    def planes(parts):
        stack = np.concatenate(parts, axis=2)
        return np.where(np.repeat(zero_fill, stack.shape[2], axis=2), 0.0,
                        stack).astype(np.float32)

    diffuse = FeatureStack(planes([inp, med, mx]),
                           ("input", "median", "max"), mask)
    specular = FeatureStack(planes([inp, med, mx, mn, n_cam, depth3]),
                            ("input", "median", "max", "min", "normal", "depth"),
                            mask)
    return diffuse, specular
