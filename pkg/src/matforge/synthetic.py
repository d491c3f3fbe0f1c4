"""Procedural test scenes with known material atlases.

Builds a ground plane plus simple objects, each unwrapped into its own UV
island, paints a ground-truth atlas, forward-renders calibrated captures
with the direct-lighting renderer, and writes everything as a loadable scene
(OBJ + PFM views + JSON config). Used by the closed-loop tests and as a demo
scene generator.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .atlas import MaterialAtlas
from .images import save_image, write_pfm
from .lights import PointLight
from .materials import MIN_ROUGHNESS
from .mesh import TriangleMesh, make_mesh, save_mesh
from .render import rerender
from .scene import Camera

# UV island rectangles (u0, v0, u1, v1) for the four scene pieces
_ISLANDS = {
    "plane": (0.02, 0.02, 0.48, 0.48),
    "box": (0.52, 0.02, 0.98, 0.48),
    "tallbox": (0.02, 0.52, 0.48, 0.98),
    "pyramid": (0.52, 0.52, 0.98, 0.98),
}

_MATERIALS = {
    "plane": {"specular": 0.25, "roughness": 0.55},
    "box": {"diffuse": (0.60, 0.15, 0.12), "specular": 0.40, "roughness": 0.35},
    "tallbox": {"diffuse": (0.12, 0.50, 0.20), "specular": 0.15, "roughness": 0.70},
    "pyramid": {"diffuse": (0.65, 0.60, 0.15), "specular": 0.50, "roughness": 0.45},
}


class _MeshBuilder:
    def __init__(self):
        self.positions = []
        self.uvs = []
        self.triangles = []

    def quad(self, corners, uv_rect):
        """corners: 4 points CCW seen from the front; uv_rect: (u0,v0,u1,v1)."""
        u0, v0, u1, v1 = uv_rect
        uvs = [(u0, v0), (u1, v0), (u1, v1), (u0, v1)]
        base = len(self.positions)
        self.positions.extend(corners)
        self.uvs.extend(uvs)
        self.triangles.append((base, base + 1, base + 2))
        self.triangles.append((base, base + 2, base + 3))

    def tri(self, corners, uv_pts):
        base = len(self.positions)
        self.positions.extend(corners)
        self.uvs.extend(uv_pts)
        self.triangles.append((base, base + 1, base + 2))

    def build(self) -> TriangleMesh:
        return make_mesh(np.asarray(self.positions, dtype=np.float64),
                         np.asarray(self.uvs, dtype=np.float64),
                         np.asarray(self.triangles, dtype=np.int32))


def _sub_rect(rect, ix, iy, nx, ny, margin=0.01):
    u0, v0, u1, v1 = rect
    du = (u1 - u0) / nx
    dv = (v1 - v0) / ny
    return (u0 + ix * du + margin, v0 + iy * dv + margin,
            u0 + (ix + 1) * du - margin, v0 + (iy + 1) * dv - margin)


def _add_open_box(b: _MeshBuilder, center, size, height, island):
    """Four sides plus a top, no bottom (it rests on the plane)."""
    cx, cy = center
    hx, hy = size[0] / 2.0, size[1] / 2.0
    z0, z1 = 0.0, height
    c = {
        "x0y0": (cx - hx, cy - hy), "x1y0": (cx + hx, cy - hy),
        "x1y1": (cx + hx, cy + hy), "x0y1": (cx - hx, cy + hy),
    }

    def wall(a, bpt, cell):
        (ax, ay), (bx, by) = c[a], c[bpt]
        b.quad([(ax, ay, z0), (bx, by, z0), (bx, by, z1), (ax, ay, z1)],
               _sub_rect(island, *cell, 3, 2))

    # outward-facing order: walls wound CCW seen from outside
    wall("x0y0", "x1y0", (0, 0))  # -y side
    wall("x1y0", "x1y1", (1, 0))  # +x side
    wall("x1y1", "x0y1", (2, 0))  # +y side
    wall("x0y1", "x0y0", (0, 1))  # -x side
    b.quad([(cx - hx, cy - hy, z1), (cx + hx, cy - hy, z1),
            (cx + hx, cy + hy, z1), (cx - hx, cy + hy, z1)],
           _sub_rect(island, 1, 1, 3, 2))


def _add_pyramid(b: _MeshBuilder, center, half, height, island):
    cx, cy = center
    apex = (cx, cy, height)
    corners = [(cx - half, cy - half, 0.0), (cx + half, cy - half, 0.0),
               (cx + half, cy + half, 0.0), (cx - half, cy + half, 0.0)]
    for i in range(4):
        a = corners[i]
        c2 = corners[(i + 1) % 4]
        u0, v0, u1, v1 = _sub_rect(island, i % 2, i // 2, 2, 2)
        b.tri([a, c2, apex], [(u0, v0), (u1, v0), (0.5 * (u0 + u1), v1)])


def build_three_object_mesh(extent: float = 1.2) -> TriangleMesh:
    b = _MeshBuilder()
    e = extent
    b.quad([(-e, -e, 0.0), (e, -e, 0.0), (e, e, 0.0), (-e, e, 0.0)],
           _ISLANDS["plane"])
    _add_open_box(b, (-0.45, -0.30), (0.5, 0.5), 0.5, _ISLANDS["box"])
    _add_open_box(b, (0.50, -0.35), (0.35, 0.35), 0.8, _ISLANDS["tallbox"])
    _add_pyramid(b, (0.05, 0.50), 0.30, 0.6, _ISLANDS["pyramid"])
    return b.build()


def paint_ground_truth_atlas(resolution: int) -> MaterialAtlas:
    """Known per-island materials; the plane gets a smooth diffuse gradient."""
    d = np.zeros((resolution, resolution, 3), dtype=np.float64)
    s = np.zeros((resolution, resolution, 3), dtype=np.float64)
    r = np.full((resolution, resolution), MIN_ROUGHNESS, dtype=np.float64)
    mask = np.zeros((resolution, resolution), dtype=bool)
    uu = (np.arange(resolution) + 0.5) / resolution
    ug, vg = np.meshgrid(uu, uu)

    def island_mask(rect):
        u0, v0, u1, v1 = rect
        return (ug >= u0) & (ug <= u1) & (vg >= v0) & (vg <= v1)

    for name, rect in _ISLANDS.items():
        m = island_mask(rect)
        mat = _MATERIALS[name]
        if name == "plane":
            u0, _, u1, _ = rect
            tt = np.clip((ug - u0) / (u1 - u0), 0.0, 1.0)
            lo = np.array([0.15, 0.25, 0.50])
            hi = np.array([0.70, 0.60, 0.30])
            grad = lo[None, None, :] + tt[:, :, None] * (hi - lo)[None, None, :]
            d[m] = grad[m]
        else:
            d[m] = np.asarray(mat["diffuse"])
        s[m] = mat["specular"]
        r[m] = mat["roughness"]
        mask |= m
    return MaterialAtlas(diffuse=d.astype(np.float32), specular=s.astype(np.float32),
                         roughness=r.astype(np.float32), coverage=mask,
                         count=mask.astype(np.int32), sample_mask=mask)


def look_at_camera(position, target, focal_px: float, resolution) -> Camera:
    position = np.asarray(position, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    fwd = target - position
    fwd /= np.linalg.norm(fwd)
    up = np.array([0.0, 0.0, 1.0])
    if abs(fwd @ up) > 0.99:
        up = np.array([0.0, 1.0, 0.0])
    right = np.cross(fwd, up)
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    rot = np.stack([right, down, fwd])
    w, h = resolution
    return Camera(rotation=rot, translation=-rot @ position,
                  focal=(focal_px, focal_px),
                  principal=(w / 2.0 - 0.5, h / 2.0 - 0.5),
                  resolution=(w, h))


def ring_cameras(n: int, radius: float, target, resolution,
                 focal_px: float, elevations=(0.30, 0.62, 0.95)) -> list[Camera]:
    cams = []
    target = np.asarray(target, dtype=np.float64)
    for i in range(n):
        ang = 2.0 * np.pi * i / n
        elev = elevations[i % len(elevations)]
        pos = target + radius * np.array([
            np.cos(ang) * np.cos(elev), np.sin(ang) * np.cos(elev), np.sin(elev)])
        cams.append(look_at_camera(pos, target, focal_px, resolution))
    return cams


def default_lights() -> list[PointLight]:
    """One high light and one lower one, so vertical faces catch highlights
    in several ring cameras."""
    return [
        PointLight(position=np.array([1.9, -1.5, 2.5]),
                   intensity=np.array([4.5, 4.2, 4.0])),
        PointLight(position=np.array([-1.9, 1.9, 1.2]),
                   intensity=np.array([3.2, 3.4, 3.8])),
    ]


def write_scene(out_dir, mesh: TriangleMesh, cameras, lights, gt_atlas,
                atlas_resolution: int, seed: int = 0,
                predictor: dict | None = None,
                bilateral: dict | None = None) -> Path:
    """Forward-render the views and write a complete loadable scene."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_mesh(mesh, out / "mesh.obj")
    views = []
    for i, cam in enumerate(cameras):
        img = rerender(gt_atlas, mesh, cam, point_lights=lights)
        name = f"view_{i:03d}.pfm"
        save_image(img, out / name)
        entry = cam.to_dict()
        entry["image"] = name
        entry["gamma"] = False
        views.append(entry)
    write_pfm(out / "gt_diffuse.pfm", gt_atlas.diffuse)
    write_pfm(out / "gt_specular.pfm", gt_atlas.specular)
    write_pfm(out / "gt_roughness.pfm", gt_atlas.roughness)
    cfg = {
        "mesh": "mesh.obj",
        "atlas_resolution": atlas_resolution,
        "seed": seed,
        "views": views,
        "lights": [{"type": "point",
                    "position": [float(x) for x in pl.position],
                    "intensity": [float(x) for x in pl.intensity]}
                   for pl in lights],
        "predictor": predictor or {"mode": "optimize", "iterations": 250,
                                   "step_size": 0.03, "early_stop": 1e-6},
        "bilateral": bilateral or {},
    }
    path = out / "scene.json"
    path.write_text(json.dumps(cfg, indent=2))
    return path


def generate_three_object_scene(out_dir, n_views: int = 12,
                                view_size: tuple[int, int] = (256, 256),
                                atlas_resolution: int = 512,
                                gt_resolution: int | None = None,
                                seed: int = 0,
                                predictor: dict | None = None) -> Path:
    """The closed-loop scene: 3 objects on a plane, 12 views, 2 point lights."""
    mesh = build_three_object_mesh()
    gt = paint_ground_truth_atlas(gt_resolution or atlas_resolution)
    w, _h = view_size
    cams = ring_cameras(n_views, radius=2.7, target=np.array([0.0, 0.0, 0.25]),
                        resolution=view_size, focal_px=0.95 * w)
    # smoothing tuned for piecewise-constant specular/roughness over islands
    bilateral = {"lambda_smooth": 16.0, "sigma_xy": 12.0}
    return write_scene(out_dir, mesh, cams, default_lights(), gt,
                       atlas_resolution, seed=seed, predictor=predictor,
                       bilateral=bilateral)


def generate_plane_scene(out_dir, view_size=(96, 96), atlas_resolution=64,
                         seed: int = 0) -> Path:
    """Minimal one-view diffuse-plane scene for smoke tests."""
    b = _MeshBuilder()
    b.quad([(-1, -1, 0.0), (1, -1, 0.0), (1, 1, 0.0), (-1, 1, 0.0)],
           (0.05, 0.05, 0.95, 0.95))
    mesh = b.build()
    res = atlas_resolution
    d = np.full((res, res, 3), 0.45, dtype=np.float32)
    s = np.zeros((res, res, 3), dtype=np.float32)
    r = np.ones((res, res), dtype=np.float32)
    mask = np.ones((res, res), dtype=bool)
    gt = MaterialAtlas(d, s, r, mask, mask.astype(np.int32), mask)
    cam = look_at_camera(np.array([0.0, -0.4, 2.4]), np.array([0.0, 0.0, 0.0]),
                         0.9 * view_size[0], view_size)
    lights = [PointLight(position=np.array([0.5, -0.5, 3.0]),
                         intensity=np.array([6.0, 6.0, 6.0]))]
    return write_scene(out_dir, mesh, [cam], lights, gt, atlas_resolution,
                       seed=seed, predictor={"mode": "heuristic"})
