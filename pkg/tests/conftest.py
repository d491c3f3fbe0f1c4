import numpy as np
import pytest

from matforge.mesh import make_mesh
from matforge.scene import Camera


@pytest.fixture
def unit_square():
    """Two triangles spanning [0,1]^2 at z=0, normals +z, full UV range."""
    pos = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float)
    uv = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    tri = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int32)
    return make_mesh(pos, uv, tri)


def look_down_camera(height=2.0, focal=100.0, size=64, center_xy=(0.5, 0.5)):
    """Camera above the unit square looking straight down -z."""
    rot = np.array([[1.0, 0.0, 0.0],
                    [0.0, -1.0, 0.0],
                    [0.0, 0.0, -1.0]])
    c = np.array([center_xy[0], center_xy[1], height])
    return Camera(rotation=rot, translation=-rot @ c, focal=(focal, focal),
                  principal=((size - 1) / 2, (size - 1) / 2),
                  resolution=(size, size))


@pytest.fixture
def down_camera():
    return look_down_camera()


def icosphere(subdivisions=3, radius=1.0):
    """Subdivided icosahedron with unit normals and a crude UV projection."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=float)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = list(verts)
    for _ in range(subdivisions):
        cache = {}
        new_faces = []

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                m = m / np.linalg.norm(m)
                cache[key] = len(verts)
                verts.append(m)
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    pos = np.asarray(verts) * radius
    # spherical projection is fine as a placeholder UV; tests using the
    # sphere never rely on a seam-free unwrap
    u = 0.5 + np.arctan2(pos[:, 1], pos[:, 0]) / (2 * np.pi)
    v = 0.5 + np.arcsin(np.clip(pos[:, 2] / radius, -1, 1)) / np.pi
    uvs = np.clip(np.stack([u, v], axis=1), 0.0, 1.0)
    return make_mesh(pos, uvs, np.asarray(faces, dtype=np.int32),
                     normals=pos / np.linalg.norm(pos, axis=1, keepdims=True))
