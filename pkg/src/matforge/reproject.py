"""Geometric core: project points into views, test visibility by ray casting,
and fetch reprojected colors with bilinear sampling.

The scalar functions are the reference contract; the per-view batch helpers
reuse the same compiled cores, so both paths agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from numba import njit

from .bvh import bvh_any_hit, bvh_ray_cast, bvh_ray_cast_batch
from .images import RadianceImage
from .mesh import TriangleMesh

if TYPE_CHECKING:
    from .scene import Camera, SceneDescription


@dataclass(frozen=True)
class SurfacePoint:
    position: np.ndarray     # (3,)
    normal: np.ndarray       # (3,) unit, interpolated shading normal
    triangle_id: int
    barycentric: np.ndarray  # (3,) sums to 1

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64))
        object.__setattr__(self, "normal", np.asarray(self.normal, dtype=np.float64))
        object.__setattr__(self, "barycentric", np.asarray(self.barycentric, dtype=np.float64))
        b = self.barycentric
        if b.min() < -1e-6 or abs(b.sum() - 1.0) > 1e-6:
            raise ValueError("barycentric coordinates must be >= 0 and sum to 1")
        if abs(np.linalg.norm(self.normal) - 1.0) > 1e-4:
            raise ValueError("shading normal must be unit length")


@dataclass(frozen=True)
class Observation:
    view_id: int
    color: np.ndarray     # (3,) linear RGB
    view_dir: np.ndarray  # (3,) unit, from point toward camera
    distance: float       # meters, > 0


def project(camera: "Camera", point) -> tuple[tuple[float, float], float]:
    """Pinhole projection; returns ((px, py), depth). Raises on z <= 1e-6."""
    p = np.asarray(point, dtype=np.float64)
    cam = camera.rotation @ p + camera.translation
    if cam[2] <= 1e-6:
        raise ValueError("point is at or behind the camera plane")
    fx, fy = camera.focal
    cx, cy = camera.principal
    return (fx * cam[0] / cam[2] + cx, fy * cam[1] / cam[2] + cy), float(cam[2])


def unproject(camera: "Camera", pixel, depth: float) -> np.ndarray:
    """Inverse of project at a known depth."""
    fx, fy = camera.focal
    cx, cy = camera.principal
    cam = np.array([(pixel[0] - cx) / fx * depth, (pixel[1] - cy) / fy * depth, depth])
    return camera.rotation.T @ (cam - camera.translation)


def ray_cast(mesh: TriangleMesh, origin, direction) -> SurfacePoint | None:
    """Nearest intersection along a unit-direction ray, or None on miss."""
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    if abs(np.linalg.norm(d) - 1.0) > 1e-6:
        raise ValueError("ray direction must be unit length")
    tri, t, u, v = bvh_ray_cast(*mesh.bvh.arrays(),
                                o[0], o[1], o[2], d[0], d[1], d[2], 0.0, np.inf)
    if tri < 0:
        return None
    return _surface_point(mesh, int(tri), u, v, o + t * d)


def _surface_point(mesh: TriangleMesh, tri: int, u: float, v: float,
                   position: np.ndarray) -> SurfacePoint:
    w = np.array([1.0 - u - v, u, v])
    w = np.clip(w, 0.0, None)
    w /= w.sum()
    idx = mesh.triangles[tri]
    normal = w @ mesh.normals[idx]
    normal /= np.linalg.norm(normal)
    return SurfacePoint(position=position, normal=normal, triangle_id=tri, barycentric=w)


@njit(cache=True, inline="always")
def _project_core(rot, trans, fx, fy, cx, cy, w, h, px, py, pz):
    """(ok, u, v, depth); ok=False when behind the camera or out of frame."""
    zx = rot[2, 0] * px + rot[2, 1] * py + rot[2, 2] * pz + trans[2]
    if zx <= 1e-6:
        return False, 0.0, 0.0, 0.0
    xx = rot[0, 0] * px + rot[0, 1] * py + rot[0, 2] * pz + trans[0]
    yx = rot[1, 0] * px + rot[1, 1] * py + rot[1, 2] * pz + trans[1]
    u = fx * xx / zx + cx
    v = fy * yx / zx + cy
    if u < 0.0 or u > w - 1.0 or v < 0.0 or v > h - 1.0:
        return False, 0.0, 0.0, 0.0
    return True, u, v, zx


@njit(cache=True, inline="always")
def _bilinear_core(img, mask, u, v):
    """(ok, r, g, b); invalid when any tap with positive weight is masked."""
    h, w = mask.shape
    x0 = int(math.floor(u))
    y0 = int(math.floor(v))
    if x0 > w - 2:
        x0 = w - 2
    if x0 < 0:
        x0 = 0
    if y0 > h - 2:
        y0 = h - 2
    if y0 < 0:
        y0 = 0
    fx = u - x0
    fy = v - y0
    w00 = (1.0 - fx) * (1.0 - fy)
    w10 = fx * (1.0 - fy)
    w01 = (1.0 - fx) * fy
    w11 = fx * fy
    if w00 > 0.0 and not mask[y0, x0]:
        return False, 0.0, 0.0, 0.0
    if w10 > 0.0 and not mask[y0, x0 + 1]:
        return False, 0.0, 0.0, 0.0
    if w01 > 0.0 and not mask[y0 + 1, x0]:
        return False, 0.0, 0.0, 0.0
    if w11 > 0.0 and not mask[y0 + 1, x0 + 1]:
        return False, 0.0, 0.0, 0.0
    r = (w00 * img[y0, x0, 0] + w10 * img[y0, x0 + 1, 0]
         + w01 * img[y0 + 1, x0, 0] + w11 * img[y0 + 1, x0 + 1, 0])
    g = (w00 * img[y0, x0, 1] + w10 * img[y0, x0 + 1, 1]
         + w01 * img[y0 + 1, x0, 1] + w11 * img[y0 + 1, x0 + 1, 1])
    b = (w00 * img[y0, x0, 2] + w10 * img[y0, x0 + 1, 2]
         + w01 * img[y0 + 1, x0, 2] + w11 * img[y0 + 1, x0 + 1, 2])
    return True, r, g, b


@njit(cache=True, inline="always")
def _visible_core(bmin, bmax, left, right, start, count, order, v0, e1, e2,
                  center, px, py, pz, bias):
    """(visible, dir_to_cam xyz, distance): occlusion test toward a camera."""
    dx = px - center[0]
    dy = py - center[1]
    dz = pz - center[2]
    dist = math.sqrt(dx * dx + dy * dy + dz * dz)
    if dist <= bias:
        return False, 0.0, 0.0, 0.0, 0.0
    inv = 1.0 / dist
    dx *= inv
    dy *= inv
    dz *= inv
    hit = bvh_any_hit(bmin, bmax, left, right, start, count, order, v0, e1, e2,
                      center[0], center[1], center[2], dx, dy, dz,
                      1e-9 * dist, dist - bias)
    if hit:
        return False, 0.0, 0.0, 0.0, 0.0
    return True, -dx, -dy, -dz, dist


@njit(cache=True, inline="always")
def observe_core(bmin, bmax, left, right, start, count, order, v0, e1, e2,
                 rot, trans, center, fx, fy, cx, cy, w, h, img, imask,
                 px, py, pz, bias):
    """Full reprojection of one point into one view.

    Returns (ok, r, g, b, dir_x, dir_y, dir_z, distance).
    """
    ok, u, v, _ = _project_core(rot, trans, fx, fy, cx, cy, w, h, px, py, pz)
    if not ok:
        return False, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    vis, ddx, ddy, ddz, dist = _visible_core(
        bmin, bmax, left, right, start, count, order, v0, e1, e2,
        center, px, py, pz, bias)
    if not vis:
        return False, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    sok, r, g, b = _bilinear_core(img, imask, u, v)
    if not sok:
        return False, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    return True, r, g, b, ddx, ddy, ddz, dist


def is_visible(mesh: TriangleMesh, camera: "Camera", point, bias: float) -> bool:
    """True iff the camera's shadow ray reaches the point within bias slack.

    Out-of-frame and behind-camera points are not visible (no error).
    """
    p = point.position if isinstance(point, SurfacePoint) else np.asarray(point, dtype=np.float64)
    w, h = camera.resolution
    ok, _, _, _ = _project_core(camera.rotation, camera.translation,
                                camera.focal[0], camera.focal[1],
                                camera.principal[0], camera.principal[1],
                                float(w), float(h), p[0], p[1], p[2])
    if not ok:
        return False
    vis, _, _, _, _ = _visible_core(*mesh.bvh.arrays(), camera.center,
                                    p[0], p[1], p[2], bias)
    return bool(vis)


def sample_bilinear(image: RadianceImage, pixel) -> np.ndarray | None:
    """Bilinear blend of the four neighbors, or None when out of bounds or
    any contributing neighbor is masked out."""
    u, v = float(pixel[0]), float(pixel[1])
    if not (0.0 <= u <= image.width - 1 and 0.0 <= v <= image.height - 1):
        return None
    ok, r, g, b = _bilinear_core(image.pixels.astype(np.float64), image.mask, u, v)
    if not ok:
        return None
    return np.array([r, g, b])


def gather_observations(scene: "SceneDescription", point: SurfacePoint) -> list[Observation]:
    """One Observation per view that sees the point, ordered by view_id."""
    bias = scene.visibility_bias
    out = []
    p = point.position
    arrays = scene.mesh.bvh.arrays()
    for view_id, (cam, img) in enumerate(zip(scene.cameras, scene.images)):
        w, h = cam.resolution
        ok, r, g, b, dx, dy, dz, dist = observe_core(
            *arrays, cam.rotation, cam.translation, cam.center,
            cam.focal[0], cam.focal[1], cam.principal[0], cam.principal[1],
            float(w), float(h), img.pixels.astype(np.float64), img.mask,
            p[0], p[1], p[2], bias)
        if ok:
            out.append(Observation(view_id=view_id, color=np.array([r, g, b]),
                                   view_dir=np.array([dx, dy, dz]), distance=dist))
    return out


def view_geometry(mesh: TriangleMesh, camera: "Camera"):
    """Per-pixel primary-ray geometry for a view.

    Returns (positions (H,W,3), normals (H,W,3), tri (H,W) int64, depth (H,W),
    valid (H,W), bary (H,W,3)); invalid pixels hold zeros/-1.
    """
    dirs = camera.ray_directions()
    h, w = dirs.shape[:2]
    origin = np.broadcast_to(camera.center, (h * w, 3))
    flat_dirs = np.ascontiguousarray(dirs.reshape(-1, 3))
    tri, t, u, v = bvh_ray_cast_batch(*mesh.bvh.arrays(),
                                      np.ascontiguousarray(origin), flat_dirs, 0.0)
    valid = tri >= 0
    tri_s = np.where(valid, tri, 0)
    t = np.where(valid, t, 0.0)
    bary = np.stack([1.0 - u - v, u, v], axis=1)
    bary = np.clip(bary, 0.0, None)
    bary /= bary.sum(axis=1, keepdims=True)
    corners = mesh.triangles[tri_s]
    normals = np.einsum("nk,nkc->nc", bary, mesh.normals[corners])
    normals /= np.maximum(np.linalg.norm(normals, axis=1, keepdims=True), 1e-300)
    positions = origin + t[:, None] * flat_dirs
    cam_pts = positions @ camera.rotation.T + camera.translation
    depth = cam_pts[:, 2]
    positions = np.where(valid[:, None], positions, 0.0)
    normals = np.where(valid[:, None], normals, 0.0)
    depth = np.where(valid, depth, 0.0)
    bary = np.where(valid[:, None], bary, 0.0)
    return (positions.reshape(h, w, 3), normals.reshape(h, w, 3),
            np.where(valid, tri, -1).reshape(h, w), depth.reshape(h, w),
            valid.reshape(h, w), bary.reshape(h, w, 3))
