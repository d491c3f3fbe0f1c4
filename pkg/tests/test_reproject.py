import numpy as np
import pytest

from matforge.images import RadianceImage
from matforge.mesh import make_mesh
from matforge.reproject import (gather_observations, is_visible, project, ray_cast,
                                sample_bilinear, unproject, view_geometry)
from matforge.scene import Camera, SceneDescription

from conftest import look_down_camera


def tilted_camera(position, target, focal=80.0, size=48):
    fwd = np.asarray(target, dtype=float) - np.asarray(position, dtype=float)
    fwd /= np.linalg.norm(fwd)
    up = np.array([0.0, 0.0, 1.0])
    if abs(fwd @ up) > 0.99:
        up = np.array([0.0, 1.0, 0.0])
    right = np.cross(fwd, up)
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    rot = np.stack([right, down, fwd])
    return Camera(rot, -rot @ np.asarray(position, dtype=float), (focal, focal),
                  ((size - 1) / 2, (size - 1) / 2), (size, size))


def make_scene(mesh, cameras, pixel_value=0.5):
    images = []
    for cam in cameras:
        w, h = cam.resolution
        images.append(RadianceImage(np.full((h, w, 3), pixel_value, np.float32),
                                    np.ones((h, w), bool)))
    return SceneDescription(mesh=mesh, cameras=cameras, images=images,
                            point_lights=[], sg_lights=[], atlas_resolution=32)


def test_project_principal_point():
    cam = Camera(np.eye(3), np.zeros(3), (100.0, 100.0), (50.0, 50.0), (101, 101))
    (px, py), depth = project(cam, np.array([0.0, 0.0, 2.0]))
    assert (px, py) == (50.0, 50.0)
    assert depth == 2.0


def test_project_behind_camera_errors():
    cam = Camera(np.eye(3), np.zeros(3), (100.0, 100.0), (50.0, 50.0), (101, 101))
    with pytest.raises(ValueError, match="behind"):
        project(cam, np.array([0.0, 0.0, -1.0]))


def test_project_unproject_roundtrip():
    rng = np.random.default_rng(2)
    cam = look_down_camera()
    for _ in range(100):
        p = np.array([rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8),
                      rng.uniform(-0.5, 1.0)])
        pix, depth = project(cam, p)
        assert np.abs(unproject(cam, pix, depth) - p).max() < 1e-5


def test_ray_cast_square(unit_square):
    hit = ray_cast(unit_square, np.array([0.0, 0.0, 5.0]),
                   np.array([0.0, 0.0, -1.0]))
    assert hit is not None
    assert np.abs(hit.position - [0, 0, 0]).max() < 1e-12
    assert np.abs(hit.normal - [0, 0, 1]).max() < 1e-12


def test_ray_parallel_misses(unit_square):
    assert ray_cast(unit_square, np.array([0.0, 0.0, 1.0]),
                    np.array([1.0, 0.0, 0.0])) is None


def occluded_square_mesh():
    """Unit square at z=0 plus a half-size occluder quad at z=1."""
    pos = np.array([
        [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
        [0.3, 0.3, 1.0], [0.7, 0.3, 1.0], [0.7, 0.7, 1.0], [0.3, 0.7, 1.0],
    ], dtype=float)
    uv = np.array([[0, 0], [0.5, 0], [0.5, 0.5], [0, 0.5],
                   [0.6, 0.6], [0.9, 0.6], [0.9, 0.9], [0.6, 0.9]])
    tri = np.array([[0, 1, 2], [0, 2, 3], [4, 5, 6], [4, 6, 7]], dtype=np.int32)
    return make_mesh(pos, uv, tri)


def test_visibility_with_occluder():
    mesh = occluded_square_mesh()
    cam = look_down_camera(height=2.0)
    bias = 1e-3 * mesh.diagonal
    first = ray_cast(mesh, np.array([0.5, 0.5, 3.0]), np.array([0.0, 0.0, -1.0]))
    assert first.position[2] == pytest.approx(1.0)  # occluder hit first
    center = ray_cast(mesh, np.array([0.5, 0.5, 0.5]), np.array([0.0, 0.0, -1.0]))
    assert not is_visible(mesh, cam, center, bias)
    corner = ray_cast(mesh, np.array([0.05, 0.05, 0.5]), np.array([0.0, 0.0, -1.0]))
    assert is_visible(mesh, cam, corner, bias)


def test_visibility_grazing_self_intersection(unit_square):
    # camera nearly in the square's plane: shadow ray grazes its own triangle
    cam = tilted_camera([2.5, 0.5, 0.12], [0.5, 0.5, 0.0])
    bias = 1e-3 * unit_square.diagonal
    point = ray_cast(unit_square, np.array([0.5, 0.5, 1.0]),
                     np.array([0.0, 0.0, -1.0]))
    assert is_visible(unit_square, cam, point, bias)


def test_visibility_bias_scaling_invariance():
    mesh = occluded_square_mesh()
    cams = [look_down_camera(height=2.0),
            tilted_camera([1.5, 1.5, 2.0], [0.5, 0.5, 0.0])]
    bias = 1e-3 * mesh.diagonal
    rng = np.random.default_rng(8)
    for _ in range(60):
        p = ray_cast(mesh, np.array([rng.uniform(0, 1), rng.uniform(0, 1), 0.5]),
                     np.array([0.0, 0.0, -1.0]))
        if p is None:
            continue
        for cam in cams:
            base = is_visible(mesh, cam, p, bias)
            assert is_visible(mesh, cam, p, bias * 2) == base
            assert is_visible(mesh, cam, p, bias / 2) == base


def test_bilinear_examples():
    px = np.zeros((2, 2, 3), np.float32)
    px[0, 1] = 1.0
    img = RadianceImage(px, np.ones((2, 2), bool))
    assert np.allclose(sample_bilinear(img, (1.0, 0.0)), 1.0)
    assert np.allclose(sample_bilinear(img, (0.5, 0.0)), 0.5)
    assert sample_bilinear(img, (2.5, 0.0)) is None


def test_bilinear_masked_tap_invalidates():
    px = np.ones((2, 2, 3), np.float32)
    mask = np.ones((2, 2), bool)
    mask[0, 1] = False
    img = RadianceImage(px, mask)
    assert sample_bilinear(img, (0.5, 0.0)) is None
    # zero-weight masked neighbor does not invalidate
    assert sample_bilinear(img, (0.0, 0.0)) is not None


def test_bilinear_matches_dense_oracle():
    rng = np.random.default_rng(9)
    px = rng.random((8, 10, 3)).astype(np.float32)
    img = RadianceImage(px, np.ones((8, 10), bool))
    for _ in range(200):
        u = rng.uniform(0, 9)
        v = rng.uniform(0, 7)
        x0, y0 = int(np.floor(u)), int(np.floor(v))
        x0, y0 = min(x0, 8), min(y0, 6)
        fx, fy = u - x0, v - y0
        ref = ((1 - fx) * (1 - fy) * px[y0, x0] + fx * (1 - fy) * px[y0, x0 + 1]
               + (1 - fx) * fy * px[y0 + 1, x0] + fx * fy * px[y0 + 1, x0 + 1])
        got = sample_bilinear(img, (u, v))
        assert np.abs(got - ref).max() < 1e-6


def test_gather_observations_counts(unit_square):
    cams = [look_down_camera(), tilted_camera([1.5, 0.5, 1.5], [0.5, 0.5, 0.0]),
            tilted_camera([-0.5, 0.5, 1.5], [0.5, 0.5, 0.0])]
    scene = make_scene(unit_square, cams)
    point = ray_cast(unit_square, np.array([0.5, 0.5, 1.0]),
                     np.array([0.0, 0.0, -1.0]))
    obs = gather_observations(scene, point)
    assert [o.view_id for o in obs] == [0, 1, 2]
    for o in obs:
        assert np.allclose(o.color, 0.5)
        assert o.distance > 0
        assert abs(np.linalg.norm(o.view_dir) - 1) < 1e-9


def test_gather_outside_frustum(unit_square):
    cam = look_down_camera(focal=400.0)  # narrow fov around the center
    scene = make_scene(unit_square, [cam])
    point = ray_cast(unit_square, np.array([0.02, 0.02, 1.0]),
                     np.array([0.0, 0.0, -1.0]))
    assert gather_observations(scene, point) == []


def test_gather_occluded_view_absent():
    mesh = occluded_square_mesh()
    top = look_down_camera(height=2.5)
    side = tilted_camera([2.0, 0.5, 0.8], [0.5, 0.5, 0.2])
    scene = make_scene(mesh, [top, side])
    # point under the occluder: hidden from the top camera, seen from the side
    point = ray_cast(mesh, np.array([0.5, 0.5, 0.5]), np.array([0.0, 0.0, -1.0]))
    obs = gather_observations(scene, point)
    assert [o.view_id for o in obs] == [1]


def test_observation_reprojects_within_half_pixel(unit_square):
    cams = [look_down_camera(), tilted_camera([1.2, 0.1, 1.1], [0.5, 0.5, 0.0])]
    scene = make_scene(unit_square, cams)
    rng = np.random.default_rng(4)
    for _ in range(40):
        point = ray_cast(unit_square,
                         np.array([rng.uniform(0, 1), rng.uniform(0, 1), 1.0]),
                         np.array([0.0, 0.0, -1.0]))
        for o in gather_observations(scene, point):
            cam = scene.cameras[o.view_id]
            (px, py), _ = project(cam, point.position)
            # the color was sampled exactly at the projection
            assert 0 <= px <= cam.resolution[0] - 1
            assert 0 <= py <= cam.resolution[1] - 1


def test_view_geometry_matches_scalar(unit_square):
    cam = look_down_camera(size=16)
    pos, nrm, tri, depth, valid, bary = view_geometry(unit_square, cam)
    dirs = cam.ray_directions()
    for y in range(0, 16, 3):
        for x in range(0, 16, 3):
            hit = ray_cast(unit_square, cam.center, dirs[y, x])
            assert valid[y, x] == (hit is not None)
            if hit is not None:
                assert np.abs(pos[y, x] - hit.position).max() < 1e-9
                assert tri[y, x] == hit.triangle_id
