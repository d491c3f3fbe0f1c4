"""Indexed triangle meshes: OBJ loading, vertex normals, bounding info.

The loader accepts the v/vt/vn/f subset of Wavefront OBJ. UV coordinates are
mandatory (the atlas baker needs them); normals are optional and are computed
by area-weighted face averaging when absent. Faces indexing different
position/uv/normal records are welded into unique mesh vertices.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bvh import Bvh, build_bvh
from .errors import MeshError


@dataclass(frozen=True)
class TriangleMesh:
    positions: np.ndarray  # (V, 3) f8, meters
    normals: np.ndarray    # (V, 3) f8, unit
    uvs: np.ndarray        # (V, 2) f8, in [0, 1]^2
    triangles: np.ndarray  # (T, 3) i4
    bvh: Bvh

    @property
    def num_vertices(self) -> int:
        return len(self.positions)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def diagonal(self) -> float:
        """Length of the axis-aligned bounding-box diagonal."""
        return float(np.linalg.norm(self.positions.max(axis=0) - self.positions.min(axis=0)))


def make_mesh(positions, uvs, triangles, normals=None) -> TriangleMesh:
    """Validate arrays, fill in missing normals, and build the BVH."""
    positions = np.ascontiguousarray(positions, dtype=np.float64)
    uvs = np.ascontiguousarray(uvs, dtype=np.float64)
    triangles = np.ascontiguousarray(triangles, dtype=np.int32)
    nv = len(positions)
    if positions.ndim != 2 or positions.shape[1] != 3:
        raise MeshError("positions must be (V, 3)")
    if uvs.shape != (nv, 2):
        raise MeshError("uvs must be (V, 2) matching positions")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise MeshError("triangles must be (T, 3)")
    if len(triangles) == 0:
        raise MeshError("mesh has no triangles")
    if triangles.min() < 0 or triangles.max() >= nv:
        raise MeshError("triangle index out of range")
    if uvs.min() < 0.0 or uvs.max() > 1.0:
        raise MeshError("UV coordinates must lie in [0, 1]")

    _reject_degenerate(positions, triangles)

    if normals is None:
        normals = compute_vertex_normals(positions, triangles)
    else:
        normals = np.ascontiguousarray(normals, dtype=np.float64)
        if normals.shape != (nv, 3):
            raise MeshError("normals must be (V, 3) matching positions")
        length = np.linalg.norm(normals, axis=1)
        if np.any(length < 1e-12):
            raise MeshError("zero-length vertex normal")
        normals = normals / length[:, None]

    return TriangleMesh(positions, normals, uvs, triangles, build_bvh(positions, triangles))


def _reject_degenerate(positions, triangles) -> None:
    pts = positions[triangles]
    cross = np.cross(pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0])
    area2 = np.linalg.norm(cross, axis=1)
    diag = np.linalg.norm(positions.max(axis=0) - positions.min(axis=0))
    bad = np.nonzero(area2 <= 1e-14 * max(diag * diag, 1e-300))[0]
    if bad.size:
        raise MeshError(f"degenerate (zero-area) triangle at index {int(bad[0])}")


def compute_vertex_normals(positions, triangles) -> np.ndarray:
    """Area-weighted average of incident face normals, normalized per vertex.

    Vertices referenced by no triangle get +Z.
    """
    pts = positions[triangles]
    face_n = np.cross(pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0])  # |.| = 2*area
    acc = np.zeros_like(positions)
    for k in range(3):
        np.add.at(acc, triangles[:, k], face_n)
    length = np.linalg.norm(acc, axis=1)
    out = np.zeros_like(acc)
    nonzero = length > 1e-300
    out[nonzero] = acc[nonzero] / length[nonzero, None]
    out[~nonzero] = (0.0, 0.0, 1.0)
    return out


def _parse_index(token: str, length: int) -> int:
    i = int(token)
    if i > 0:
        return i - 1
    if i < 0:
        return length + i
    raise MeshError("OBJ indices are 1-based; 0 is invalid")


def load_mesh(path) -> TriangleMesh:
    """Load an OBJ file with UVs into a TriangleMesh (BVH included)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise MeshError(f"cannot read {path}: {e}") from e

    raw_v: list[list[float]] = []
    raw_vt: list[list[float]] = []
    raw_vn: list[list[float]] = []
    corners: list[list[tuple[int, int, int]]] = []  # per face: (v, vt, vn), -1 = absent

    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens or tokens[0].startswith("#"):
            continue
        kind = tokens[0]
        try:
            if kind == "v":
                raw_v.append([float(x) for x in tokens[1:4]])
            elif kind == "vt":
                raw_vt.append([float(x) for x in tokens[1:3]])
            elif kind == "vn":
                raw_vn.append([float(x) for x in tokens[1:4]])
            elif kind == "f":
                face = []
                for part in tokens[1:]:
                    fields = part.split("/")
                    vi = _parse_index(fields[0], len(raw_v))
                    ti = -1
                    ni = -1
                    if len(fields) > 1 and fields[1]:
                        ti = _parse_index(fields[1], len(raw_vt))
                    if len(fields) > 2 and fields[2]:
                        ni = _parse_index(fields[2], len(raw_vn))
                    face.append((vi, ti, ni))
                if len(face) < 3:
                    raise MeshError(f"{path}:{lineno}: face with fewer than 3 vertices")
                corners.append(face)
        except (ValueError, IndexError) as e:
            raise MeshError(f"{path}:{lineno}: parse failure: {e}") from e

    if not corners:
        raise MeshError(f"{path}: no faces found")
    if any(c[1] < 0 for face in corners for c in face):
        raise MeshError(f"{path}: missing UVs (vt records are required for atlas baking)")

    has_all_normals = bool(raw_vn) and all(c[2] >= 0 for face in corners for c in face)

    # Weld identical (v, vt, vn) corner triples into shared mesh vertices.
    key_to_vertex: dict[tuple[int, int, int], int] = {}
    positions, uvs, normals = [], [], []
    triangles = []
    for face in corners:
        welded = []
        for key in face:
            vi, ti, ni = key
            if vi >= len(raw_v) or ti >= len(raw_vt) or (ni >= 0 and ni >= len(raw_vn)):
                raise MeshError(f"{path}: face index out of range")
            if key not in key_to_vertex:
                key_to_vertex[key] = len(positions)
                positions.append(raw_v[vi])
                uvs.append(raw_vt[ti])
                if has_all_normals:
                    normals.append(raw_vn[ni])
            welded.append(key_to_vertex[key])
        for k in range(1, len(welded) - 1):  # fan-triangulate polygons
            triangles.append((welded[0], welded[k], welded[k + 1]))

    return make_mesh(
        np.asarray(positions, dtype=np.float64),
        np.asarray(uvs, dtype=np.float64),
        np.asarray(triangles, dtype=np.int32),
        normals=np.asarray(normals, dtype=np.float64) if has_all_normals else None,
    )


def save_mesh(mesh: TriangleMesh, path) -> None:
    """Write a TriangleMesh as OBJ (v/vt/vn/f with matching indices)."""
    lines = []
    for p in mesh.positions:
        lines.append(f"v {float(p[0])!r} {float(p[1])!r} {float(p[2])!r}")
    for t in mesh.uvs:
        lines.append(f"vt {float(t[0])!r} {float(t[1])!r}")
    for n in mesh.normals:
        lines.append(f"vn {float(n[0])!r} {float(n[1])!r} {float(n[2])!r}")
    for tri in mesh.triangles:
        a, b, c = (int(i) + 1 for i in tri)
        lines.append(f"f {a}/{a}/{a} {b}/{b}/{b} {c}/{c}/{c}")
    Path(path).write_text("\n".join(lines) + "\n")
