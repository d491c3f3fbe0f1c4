"""Bake per-view material maps into a UV-space atlas.

Each atlas texel whose center falls inside a UV triangle corresponds to a
mesh surface point; every view where that point is visible contributes a
bilinear sample of its maps, and the per-channel median of those samples is
the baked value. A 2-pixel pull-push style dilation fills the UV gutters so
bilinear lookups at render time do not bleed invalid texels across seams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np
from numba import njit, prange

from .errors import MeshError
from .materials import MaterialMaps, MaterialSample
from .mesh import TriangleMesh
from .reproject import SurfacePoint, _bilinear_core, _project_core, _visible_core, is_visible, project

if TYPE_CHECKING:
    from .scene import SceneDescription

_MAX_OVERLAP_REPORT = 16


@dataclass(frozen=True)
class TexelSite:
    texel: tuple[int, int]          # (ix, iy)
    point: SurfacePoint | None
    valid: bool


@dataclass(frozen=True)
class MaterialAtlas:
    diffuse: np.ndarray      # (R, R, 3) float32
    specular: np.ndarray    # (R, R, 3) float32
    roughness: np.ndarray   # (R, R) float32
    coverage: np.ndarray    # (R, R) bool, texels baked from >= 1 sample
    count: np.ndarray       # (R, R) int32, contributing views per texel
    sample_mask: np.ndarray  # (R, R) bool, coverage plus dilated gutter

    @property
    def resolution(self) -> int:
        return self.roughness.shape[0]

    @property
    def coverage_fraction(self) -> float:
        return float(self.coverage.mean())


@njit(cache=True)
def _rasterize_kernel(positions, normals, uvs, triangles, res):
    owner = np.full((res, res), -1, dtype=np.int32)
    strict_owner = np.full((res, res), -1, dtype=np.int32)
    tex_pos = np.zeros((res, res, 3))
    tex_nrm = np.zeros((res, res, 3))
    tex_bary = np.zeros((res, res, 3))
    overlaps = np.full((_MAX_OVERLAP_REPORT, 2), -1, dtype=np.int32)
    n_overlap = 0
    for t in range(triangles.shape[0]):
        i0 = triangles[t, 0]
        i1 = triangles[t, 1]
        i2 = triangles[t, 2]
        # continuous texel coordinates: texel centers on the integer lattice
        x0 = uvs[i0, 0] * res - 0.5
        y0 = uvs[i0, 1] * res - 0.5
        x1 = uvs[i1, 0] * res - 0.5
        y1 = uvs[i1, 1] * res - 0.5
        x2 = uvs[i2, 0] * res - 0.5
        y2 = uvs[i2, 1] * res - 0.5
        det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if det == 0.0:
            continue
        inv = 1.0 / det
        lox = max(int(math.ceil(min(x0, min(x1, x2)))), 0)
        hix = min(int(math.floor(max(x0, max(x1, x2)))), res - 1)
        loy = max(int(math.ceil(min(y0, min(y1, y2)))), 0)
        hiy = min(int(math.floor(max(y0, max(y1, y2)))), res - 1)
        for iy in range(loy, hiy + 1):
            for ix in range(lox, hix + 1):
                px = float(ix)
                py = float(iy)
                l1 = ((px - x0) * (y2 - y0) - (x2 - x0) * (py - y0)) * inv
                l2 = ((x1 - x0) * (py - y0) - (px - x0) * (y1 - y0)) * inv
                l0 = 1.0 - l1 - l2
                if l0 < -1e-9 or l1 < -1e-9 or l2 < -1e-9:
                    continue
                if l0 > 1e-7 and l1 > 1e-7 and l2 > 1e-7:
                    prev = strict_owner[iy, ix]
                    if prev >= 0 and prev != t:
                        if n_overlap < _MAX_OVERLAP_REPORT:
                            overlaps[n_overlap, 0] = prev
                            overlaps[n_overlap, 1] = t
                            n_overlap += 1
                        continue
                    strict_owner[iy, ix] = t
                if owner[iy, ix] >= 0:
                    continue
                owner[iy, ix] = t
                for c in range(3):
                    tex_pos[iy, ix, c] = (l0 * positions[i0, c] + l1 * positions[i1, c]
                                          + l2 * positions[i2, c])
                    tex_nrm[iy, ix, c] = (l0 * normals[i0, c] + l1 * normals[i1, c]
                                          + l2 * normals[i2, c])
                tex_bary[iy, ix, 0] = l0
                tex_bary[iy, ix, 1] = l1
                tex_bary[iy, ix, 2] = l2
    return owner, tex_pos, tex_nrm, tex_bary, overlaps, n_overlap


def rasterize_arrays(mesh: TriangleMesh, atlas_resolution: int):
    """(tri (R,R) int32, positions, normals (unit), bary, valid) per texel.

    Raises on overlapping UV islands (the atlas must be a valid unwrap).
    """
    owner, pos, nrm, bary, overlaps, n_overlap = _rasterize_kernel(
        mesh.positions, mesh.normals, mesh.uvs, mesh.triangles,
        atlas_resolution)
    if n_overlap > 0:
        pairs = [(int(a), int(b)) for a, b in overlaps[:n_overlap]]
        raise MeshError(f"overlapping UV triangles: {pairs}")
    valid = owner >= 0
    norm = np.linalg.norm(nrm, axis=2, keepdims=True)
    nrm = np.where(norm > 1e-300, nrm / np.maximum(norm, 1e-300), 0.0)
    return owner, pos, nrm, bary, valid


def rasterize_texels(mesh: TriangleMesh, atlas_resolution: int) -> list[TexelSite]:
    """TexelSite list covering the whole atlas (invalid sites included)."""
    owner, pos, nrm, bary, valid = rasterize_arrays(mesh, atlas_resolution)
    sites = []
    for iy in range(atlas_resolution):
        for ix in range(atlas_resolution):
            if valid[iy, ix]:
                point = SurfacePoint(position=pos[iy, ix], normal=nrm[iy, ix],
                                     triangle_id=int(owner[iy, ix]),
                                     barycentric=bary[iy, ix])
                sites.append(TexelSite(texel=(ix, iy), point=point, valid=True))
            else:
                sites.append(TexelSite(texel=(ix, iy), point=None, valid=False))
    return sites


@njit(cache=True, inline="always")
def _sample_maps(md, ms, mr, mask, u, v):
    """(ok, d0,d1,d2, s0,s1,s2, r) bilinear sample of one view's maps."""
    ok, d0, d1, d2 = _bilinear_core(md, mask, u, v)
    if not ok:
        return False, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    _, s0, s1, s2 = _bilinear_core(ms, mask, u, v)
    h, w = mask.shape
    x0 = min(max(int(math.floor(u)), 0), w - 2)
    y0 = min(max(int(math.floor(v)), 0), h - 2)
    fx = u - x0
    fy = v - y0
    r = ((1 - fx) * (1 - fy) * mr[y0, x0] + fx * (1 - fy) * mr[y0, x0 + 1]
         + (1 - fx) * fy * mr[y0 + 1, x0] + fx * fy * mr[y0 + 1, x0 + 1])
    return True, d0, d1, d2, s0, s1, s2, r


@njit(cache=True, inline="always")
def _median_inplace(buf, n):
    for i in range(1, n):
        key = buf[i]
        j = i - 1
        while j >= 0 and buf[j] > key:
            buf[j + 1] = buf[j]
            j -= 1
        buf[j + 1] = key
    if n % 2 == 1:
        return buf[n // 2]
    return 0.5 * (buf[n // 2 - 1] + buf[n // 2])


@njit(cache=True, parallel=True)
def _bake_kernel(bmin, bmax, left, right, start, count_, order, v0, e1, e2,
                 rots, transs, centers, focals, principals, sizes,
                 maps_d, maps_s, maps_r, maps_mask,
                 tex_pos, tex_valid, bias):
    res = tex_valid.shape[0]
    nviews = rots.shape[0]
    atlas_d = np.zeros((res, res, 3))
    atlas_s = np.zeros((res, res, 3))
    atlas_r = np.zeros((res, res))
    counts = np.zeros((res, res), dtype=np.int32)
    for idx in prange(res * res):
        iy = idx // res
        ix = idx % res
        if not tex_valid[iy, ix]:
            continue
        px = tex_pos[iy, ix, 0]
        py = tex_pos[iy, ix, 1]
        pz = tex_pos[iy, ix, 2]
        samples = np.empty((nviews, 7))
        n = 0
        for view in range(nviews):
            ok, u, v, _ = _project_core(rots[view], transs[view],
                                        focals[view, 0], focals[view, 1],
                                        principals[view, 0], principals[view, 1],
                                        sizes[view, 0], sizes[view, 1],
                                        px, py, pz)
            if not ok:
                continue
            vis, _, _, _, _ = _visible_core(bmin, bmax, left, right, start,
                                            count_, order, v0, e1, e2,
                                            centers[view], px, py, pz, bias)
            if not vis:
                continue
            sok, d0, d1, d2, s0, s1, s2, r = _sample_maps(
                maps_d[view], maps_s[view], maps_r[view], maps_mask[view], u, v)
            if not sok:
                continue
            samples[n, 0] = d0
            samples[n, 1] = d1
            samples[n, 2] = d2
            samples[n, 3] = s0
            samples[n, 4] = s1
            samples[n, 5] = s2
            samples[n, 6] = r
            n += 1
        if n == 0:
            continue
        counts[iy, ix] = n
        buf = np.empty(n)
        for c in range(7):
            for i in range(n):
                buf[i] = samples[i, c]
            med = _median_inplace(buf, n)
            if c < 3:
                atlas_d[iy, ix, c] = med
            elif c < 6:
                atlas_s[iy, ix, c - 3] = med
            else:
                atlas_r[iy, ix] = med
    return atlas_d, atlas_s, atlas_r, counts


def gather_texel(texel: TexelSite, scene: "SceneDescription",
                 per_view_maps: Sequence[MaterialMaps]) -> list[MaterialSample]:
    """Per-view bilinear map samples at a texel's surface point, visibility
    filtered; reference path for the bake kernel."""
    if not texel.valid:
        return []
    p = texel.point.position
    bias = scene.visibility_bias
    out = []
    for view_id, (cam, maps) in enumerate(zip(scene.cameras, per_view_maps)):
        if not is_visible(scene.mesh, cam, texel.point, bias):
            continue
        try:
            (u, v), _ = project(cam, p)
        except ValueError:
            continue
        ok, d0, d1, d2, s0, s1, s2, r = _sample_maps(
            maps.diffuse.astype(np.float64), maps.specular.astype(np.float64),
            maps.roughness.astype(np.float64), maps.mask, u, v)
        if not ok:
            continue
        out.append(MaterialSample(diffuse=np.array([d0, d1, d2]),
                                  specular=np.array([s0, s1, s2]),
                                  roughness=max(float(r), 1e-6)))
    return out


def merge_median(samples: Sequence[MaterialSample]) -> MaterialSample | None:
    """Per-channel median across samples (even counts average the middles)."""
    if not samples:
        return None
    arr = np.array([[*s.diffuse, *s.specular, s.roughness] for s in samples],
                   dtype=np.float64)
    med = np.median(arr, axis=0)
    return MaterialSample(diffuse=med[0:3], specular=med[3:6],
                          roughness=float(med[6]))


def _dilate(values: np.ndarray, valid: np.ndarray, passes: int = 2):
    """Fill invalid texels from the mean of valid 8-neighbors, repeatedly."""
    vals = values.astype(np.float64).copy()
    mask = valid.copy()
    for _ in range(passes):
        acc = np.zeros_like(vals)
        cnt = np.zeros(mask.shape, dtype=np.float64)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                src_y = slice(max(dy, 0), vals.shape[0] + min(dy, 0))
                dst_y = slice(max(-dy, 0), vals.shape[0] + min(-dy, 0))
                src_x = slice(max(dx, 0), vals.shape[1] + min(dx, 0))
                dst_x = slice(max(-dx, 0), vals.shape[1] + min(-dx, 0))
                m = mask[src_y, src_x]
                acc[dst_y, dst_x] += np.where(m[..., None], vals[src_y, src_x], 0.0)
                cnt[dst_y, dst_x] += m
        fill = ~mask & (cnt > 0)
        vals[fill] = acc[fill] / cnt[fill][:, None]
        mask = mask | fill
    return vals, mask


def bake_atlas(scene: "SceneDescription", per_view_maps: Sequence[MaterialMaps],
               atlas_resolution: int) -> MaterialAtlas:
    """Rasterize texels, gather all visible views, merge by median, and fill
    a 2-texel gutter ring around the islands."""
    from .viewstats import pack_views

    if len(per_view_maps) != scene.num_views:
        raise ValueError("need one MaterialMaps per view")
    _owner, tex_pos, _nrm, _bary, tex_valid = rasterize_arrays(
        scene.mesh, atlas_resolution)
    packed = pack_views(scene)
    hmax = max(m.roughness.shape[0] for m in per_view_maps)
    wmax = max(m.roughness.shape[1] for m in per_view_maps)
    n = scene.num_views
    maps_d = np.zeros((n, hmax, wmax, 3))
    maps_s = np.zeros((n, hmax, wmax, 3))
    maps_r = np.zeros((n, hmax, wmax))
    maps_mask = np.zeros((n, hmax, wmax), dtype=bool)
    for i, m in enumerate(per_view_maps):
        hh, ww = m.roughness.shape
        maps_d[i, :hh, :ww] = m.diffuse
        maps_s[i, :hh, :ww] = m.specular
        maps_r[i, :hh, :ww] = m.roughness
        maps_mask[i, :hh, :ww] = m.mask
    atlas_d, atlas_s, atlas_r, counts = _bake_kernel(
        *scene.mesh.bvh.arrays(),
        packed.rotations, packed.translations, packed.centers,
        packed.focals, packed.principals, packed.sizes,
        maps_d, maps_s, maps_r, maps_mask,
        tex_pos, tex_valid, scene.visibility_bias)
    coverage = counts > 0
    if not coverage.any():
        raise ValueError("atlas bake produced zero valid texels")
    stacked = np.concatenate([atlas_d, atlas_s, atlas_r[:, :, None]], axis=2)
    filled, sample_mask = _dilate(stacked, coverage, passes=2)
    return MaterialAtlas(
        diffuse=filled[:, :, 0:3].astype(np.float32),
        specular=filled[:, :, 3:6].astype(np.float32),
        roughness=filled[:, :, 6].astype(np.float32),
        coverage=coverage,
        count=counts,
        sample_mask=sample_mask,
    )
