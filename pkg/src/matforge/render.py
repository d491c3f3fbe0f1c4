"""Validation renderer: direct lighting with ray-cast shadows, plus PSNR.

This is deliberately not a path tracer; it re-renders baked materials under
the same local model used by the estimation, with point lights attenuated by
1/d^2 and a single shadow ray per light (SG lights get one shadow ray along
the lobe axis). Any standard path tracer can consume the OBJ + PFM atlas for
full GI renders.
"""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np
from numba import njit, prange

from .bvh import bvh_any_hit
from .images import RadianceImage
from .mesh import TriangleMesh
from .reproject import view_geometry
from .shading import shade_core

if TYPE_CHECKING:
    from .atlas import MaterialAtlas
    from .scene import Camera

PSNR_CAP_DB = 99.0
GAMMA = 2.2


@njit(cache=True, parallel=True)
def _light_field_kernel(bmin, bmax, left, right, start, count, order, v0, e1, e2,
                        positions, valid, light_pos, light_rgb, bias):
    h, w = valid.shape
    nl = light_pos.shape[0]
    dirs = np.zeros((h, w, nl, 3))
    rgb = np.zeros((h, w, nl, 3))
    for idx in prange(h * w):
        y = idx // w
        x = idx % w
        if not valid[y, x]:
            continue
        px = positions[y, x, 0]
        py = positions[y, x, 1]
        pz = positions[y, x, 2]
        for k in range(nl):
            dx = light_pos[k, 0] - px
            dy = light_pos[k, 1] - py
            dz = light_pos[k, 2] - pz
            dist = math.sqrt(dx * dx + dy * dy + dz * dz)
            if dist < 1e-12:
                continue
            dx /= dist
            dy /= dist
            dz /= dist
            dirs[y, x, k, 0] = dx
            dirs[y, x, k, 1] = dy
            dirs[y, x, k, 2] = dz
            occluded = bvh_any_hit(bmin, bmax, left, right, start, count, order,
                                   v0, e1, e2, px, py, pz, dx, dy, dz,
                                   bias, dist)
            if not occluded:
                att = 1.0 / (dist * dist)
                rgb[y, x, k, 0] = light_rgb[k, 0] * att
                rgb[y, x, k, 1] = light_rgb[k, 1] * att
                rgb[y, x, k, 2] = light_rgb[k, 2] * att
    return dirs, rgb


def point_light_fields(mesh: TriangleMesh, point_lights, positions, valid,
                       bias: float):
    """Per-pixel light directions and arriving radiance with shadowing.

    Occluded lights keep their direction but carry zero radiance.
    """
    if len(point_lights) == 0:
        h, w = valid.shape
        return np.zeros((h, w, 0, 3)), np.zeros((h, w, 0, 3))
    lpos = np.ascontiguousarray([pl.position for pl in point_lights])
    lrgb = np.ascontiguousarray([pl.intensity for pl in point_lights])
    return _light_field_kernel(*mesh.bvh.arrays(),
                               np.ascontiguousarray(positions), valid,
                               lpos, lrgb, bias)


@njit(cache=True, parallel=True)
def _sg_visibility_kernel(bmin, bmax, left, right, start, count, order, v0, e1, e2,
                          positions, valid, sg_axes, bias):
    h, w = valid.shape
    nsg = sg_axes.shape[0]
    vis = np.zeros((h, w, nsg), dtype=np.uint8)
    for idx in prange(h * w):
        y = idx // w
        x = idx % w
        if not valid[y, x]:
            continue
        for k in range(nsg):
            occ = bvh_any_hit(bmin, bmax, left, right, start, count, order,
                              v0, e1, e2,
                              positions[y, x, 0], positions[y, x, 1],
                              positions[y, x, 2],
                              sg_axes[k, 0], sg_axes[k, 1], sg_axes[k, 2],
                              bias, np.inf)
            if not occ:
                vis[y, x, k] = 1
    return vis


@njit(cache=True, parallel=True)
def _shade_image_kernel(normals, view_dirs, valid, mat_d, mat_s, mat_r,
                        pl_dirs, pl_rgb, sg_axes, sg_sharp, sg_amp, sg_vis):
    h, w = valid.shape
    out = np.zeros((h, w, 3))
    nsg = sg_axes.shape[0]
    for idx in prange(h * w):
        y = idx // w
        x = idx % w
        if not valid[y, x]:
            continue
        amp = np.zeros((nsg, 3))
        for k in range(nsg):
            if sg_vis[y, x, k]:
                amp[k, 0] = sg_amp[k, 0]
                amp[k, 1] = sg_amp[k, 1]
                amp[k, 2] = sg_amp[k, 2]
        r, g, b = shade_core(mat_d[y, x], mat_s[y, x], mat_r[y, x],
                             normals[y, x], view_dirs[y, x],
                             pl_dirs[y, x], pl_rgb[y, x],
                             sg_axes, sg_sharp, amp)
        out[y, x, 0] = r
        out[y, x, 1] = g
        out[y, x, 2] = b
    return out


def bilinear_grid(values: np.ndarray, mask: np.ndarray, xs: np.ndarray,
                  ys: np.ndarray):
    """Vectorized masked bilinear lookup at continuous (x, y) raster coords.

    Matches the scalar sampling rule: any tap with positive weight must be
    valid, else the sample is invalid. Returns (samples, ok).
    """
    h, w = mask.shape
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, max(h - 2, 0))
    fx = xs - x0
    fy = ys - y0
    w00 = (1 - fx) * (1 - fy)
    w10 = fx * (1 - fy)
    w01 = (1 - fx) * fy
    w11 = fx * fy
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    ok = np.ones(xs.shape, dtype=bool)
    for wt, yy, xx in ((w00, y0, x0), (w10, y0, x1), (w01, y1, x0), (w11, y1, x1)):
        ok &= (wt <= 0.0) | mask[yy, xx]
    vals = values.astype(np.float64)
    if vals.ndim == 2:
        out = (w00 * vals[y0, x0] + w10 * vals[y0, x1]
               + w01 * vals[y1, x0] + w11 * vals[y1, x1])
    else:
        out = (w00[..., None] * vals[y0, x0] + w10[..., None] * vals[y0, x1]
               + w01[..., None] * vals[y1, x0] + w11[..., None] * vals[y1, x1])
    return out, ok


def sample_atlas(atlas: "MaterialAtlas", uvs: np.ndarray):
    """Bilinear material lookup at (..., 2) UV coordinates.

    Texel (ix, iy) is centered at uv = ((ix+0.5)/W, (iy+0.5)/H); the gutter
    fill makes lookups near island borders safe.
    """
    res_y, res_x = atlas.sample_mask.shape
    u = np.clip(uvs[..., 0], 0.0, 1.0) * res_x - 0.5
    v = np.clip(uvs[..., 1], 0.0, 1.0) * res_y - 0.5
    u = np.clip(u, 0.0, res_x - 1.0)
    v = np.clip(v, 0.0, res_y - 1.0)
    d, ok = bilinear_grid(atlas.diffuse, atlas.sample_mask, u, v)
    s, ok_s = bilinear_grid(atlas.specular, atlas.sample_mask, u, v)
    r, ok_r = bilinear_grid(atlas.roughness, atlas.sample_mask, u, v)
    return d, s, r, ok & ok_s & ok_r


def rerender(atlas: "MaterialAtlas", mesh: TriangleMesh, camera: "Camera",
             point_lights=(), sg_lights=(), bias: float | None = None) -> RadianceImage:
    """Direct-lighting re-render of the baked atlas from one camera."""
    from .predict import sg_light_arrays

    if bias is None:
        bias = 1e-3 * mesh.diagonal
    positions, normals, tri, _depth, valid, bary = view_geometry(mesh, camera)
    h, w = valid.shape
    tri_s = np.where(valid, tri, 0)
    uvs = np.einsum("hwk,hwkc->hwc", bary, mesh.uvs[mesh.triangles[tri_s]])
    mat_d, mat_s, mat_r, ok = sample_atlas(atlas, uvs)
    valid = valid & ok
    mat_r = np.clip(mat_r, 1e-6, 1.0)  # keep shade_core preconditions on junk texels
    view_dirs = camera.center[None, None, :] - positions
    norms = np.maximum(np.linalg.norm(view_dirs, axis=2, keepdims=True), 1e-300)
    view_dirs = view_dirs / norms
    pl_dirs, pl_rgb = point_light_fields(mesh, point_lights, positions, valid, bias)
    sg_axes, sg_sharp, sg_amp = sg_light_arrays(sg_lights)
    if len(sg_lights):
        sg_vis = _sg_visibility_kernel(*mesh.bvh.arrays(),
                                       np.ascontiguousarray(positions), valid,
                                       sg_axes, bias)
    else:
        sg_vis = np.zeros((h, w, 0), dtype=np.uint8)
    out = _shade_image_kernel(np.ascontiguousarray(normals),
                              np.ascontiguousarray(view_dirs), valid,
                              mat_d, mat_s, mat_r,
                              pl_dirs, pl_rgb, sg_axes, sg_sharp, sg_amp, sg_vis)
    return RadianceImage(np.where(valid[:, :, None], out, 0.0).astype(np.float32),
                         valid)


def psnr(a: RadianceImage, b: RadianceImage) -> float:
    """Peak signal-to-noise ratio in dB over jointly valid pixels.

    Images are clamped to [0, 1] and compared display-referred (gamma 1/2.2);
    identical content reports the 99 dB cap.
    """
    if a.pixels.shape != b.pixels.shape:
        raise ValueError("image resolutions differ")
    mask = a.mask & b.mask
    if not mask.any():
        raise ValueError("images share no valid pixels")
    pa = np.power(np.clip(a.pixels[mask].astype(np.float64), 0.0, 1.0), 1.0 / GAMMA)
    pb = np.power(np.clip(b.pixels[mask].astype(np.float64), 0.0, 1.0), 1.0 / GAMMA)
    mse = float(np.mean((pa - pb) ** 2))
    if mse <= 0.0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(1.0 / mse), PSNR_CAP_DB)
