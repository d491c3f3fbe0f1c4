import numpy as np
import pytest

from matforge.errors import MeshError
from matforge.mesh import compute_vertex_normals, load_mesh, make_mesh, save_mesh

SQUARE_OBJ = """
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
vt 0 0
vt 1 0
vt 1 1
vt 0 1
f 1/1 2/2 3/3
f 1/1 3/3 4/4
"""

CUBE_FACES = [
    ((0, 3, 2, 1), "bottom"), ((4, 5, 6, 7), "top"),
    ((0, 1, 5, 4), "front"), ((1, 2, 6, 5), "right"),
    ((2, 3, 7, 6), "back"), ((3, 0, 4, 7), "left"),
]


def cube_obj() -> str:
    """Closed unit cube, no normals in the file, face quads wound outward."""
    corners = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
               (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)]
    lines = [f"v {x} {y} {z}" for x, y, z in corners]
    lines += ["vt 0 0", "vt 1 0", "vt 1 1", "vt 0 1"]
    for (a, b, c, d), _ in CUBE_FACES:
        lines.append(f"f {a+1}/1 {b+1}/2 {c+1}/3 {d+1}/4")
    return "\n".join(lines)


def test_unit_square_load(tmp_path):
    path = tmp_path / "sq.obj"
    path.write_text(SQUARE_OBJ)
    mesh = load_mesh(path)
    assert mesh.num_vertices == 4
    assert mesh.num_triangles == 2
    assert np.allclose(mesh.normals, [0, 0, 1])


def test_missing_uvs_rejected(tmp_path):
    path = tmp_path / "nouv.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
    with pytest.raises(MeshError, match="missing UVs"):
        load_mesh(path)


def test_cube_computed_normals_outward(tmp_path):
    path = tmp_path / "cube.obj"
    path.write_text(cube_obj())
    mesh = load_mesh(path)
    lengths = np.linalg.norm(mesh.normals, axis=1)
    assert np.allclose(lengths, 1.0, atol=1e-12)
    centroid = mesh.positions.mean(axis=0)
    outward = np.einsum("ij,ij->i", mesh.normals, mesh.positions - centroid)
    assert (outward > 0).all()


def test_cube_normals_match_face_average_oracle(tmp_path):
    # independent oracle: accumulate area-weighted face normals per vertex
    path = tmp_path / "cube.obj"
    path.write_text(cube_obj())
    mesh = load_mesh(path)
    acc = np.zeros_like(mesh.positions)
    for tri in mesh.triangles:
        a, b, c = mesh.positions[tri]
        face = np.cross(b - a, c - a)  # length = 2 * area
        for k in tri:
            acc[k] += face
    acc /= np.linalg.norm(acc, axis=1, keepdims=True)
    assert np.abs(acc - mesh.normals).max() < 1e-12


def test_normals_invariant_under_cyclic_reorder():
    rng = np.random.default_rng(0)
    pos = rng.normal(size=(6, 3))
    tris = np.array([[0, 1, 2], [2, 3, 4], [4, 5, 0]], dtype=np.int64)
    base = compute_vertex_normals(pos, tris)
    rolled = np.stack([np.roll(t, 1) for t in tris])
    assert np.abs(compute_vertex_normals(pos, rolled) - base).max() < 1e-6


def test_degenerate_triangle_rejected(tmp_path):
    path = tmp_path / "bad.obj"
    path.write_text(
        "v 0 0 0\nv 1 0 0\nv 2 0 0\nvt 0 0\nvt 1 0\nvt 1 1\nf 1/1 2/2 3/3\n")
    with pytest.raises(MeshError, match="degenerate.*index 0"):
        load_mesh(path)


def test_uv_out_of_range_rejected():
    pos = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
    uv = np.array([[0, 0], [1.5, 0], [0, 1]], dtype=float)
    with pytest.raises(MeshError, match="UV"):
        make_mesh(pos, uv, np.array([[0, 1, 2]]))


def test_negative_indices(tmp_path):
    path = tmp_path / "neg.obj"
    path.write_text(
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nf -3/-3 -2/-2 -1/-1\n")
    mesh = load_mesh(path)
    assert mesh.num_triangles == 1


def test_file_normals_are_normalized(tmp_path):
    path = tmp_path / "n.obj"
    path.write_text(
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\n"
        "vn 0 0 3\nf 1/1/1 2/2/1 3/3/1\n")
    mesh = load_mesh(path)
    assert np.allclose(mesh.normals, [0, 0, 1])


def test_save_load_roundtrip(tmp_path, unit_square=None):
    pos = np.array([[0, 0, 0], [2, 0, 0], [2, 2, 0.5], [0, 2, 0.5]])
    uv = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    tri = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int32)
    mesh = make_mesh(pos, uv, tri)
    save_mesh(mesh, tmp_path / "m.obj")
    back = load_mesh(tmp_path / "m.obj")
    assert np.array_equal(back.positions, mesh.positions)
    assert np.array_equal(back.uvs, mesh.uvs)
    assert np.array_equal(back.triangles, mesh.triangles)
    assert np.abs(back.normals - mesh.normals).max() < 1e-12
