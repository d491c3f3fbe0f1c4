"""Calibrated cameras and whole-scene description loaded from a JSON config.

Config schema (all paths relative to the config file):

    {
      "mesh": "scene.obj",
      "atlas_resolution": 1024,
      "seed": 0,
      "views": [
        {"image": "view00.pfm", "fx": .., "fy": .., "cx": .., "cy": ..,
         "width": .., "height": ..,
         "rotation": [r00, r01, r02, r10, .., r22],   # world-to-camera, row-major
         "translation": [tx, ty, tz],
         "gamma": false},
        ...
      ],
      "lights": [
        {"type": "point", "position": [..], "intensity": [..]},
        {"type": "sg", "axis": [..], "sharpness": .., "amplitude": [..]}
      ],
      "predictor": {...},     # optional, see predict.PredictorConfig
      "bilateral": {...}      # optional, see bilateral.SolverParams
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .images import RadianceImage, load_image
from .lights import PointLight, SGLight
from .mesh import TriangleMesh, load_mesh

_ROTATION_TOL = 1e-4


@dataclass(frozen=True)
class Camera:
    """Calibrated pinhole: x_cam = rotation @ x_world + translation."""

    rotation: np.ndarray     # (3, 3) orthonormal, world-to-camera
    translation: np.ndarray  # (3,) meters
    focal: tuple[float, float]      # (fx, fy) pixels
    principal: tuple[float, float]  # (cx, cy) pixels
    resolution: tuple[int, int]     # (width, height) pixels

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        tr = np.asarray(self.translation, dtype=np.float64)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)
        object.__setattr__(self, "focal", (float(self.focal[0]), float(self.focal[1])))
        object.__setattr__(self, "principal",
                           (float(self.principal[0]), float(self.principal[1])))
        object.__setattr__(self, "resolution",
                           (int(self.resolution[0]), int(self.resolution[1])))
        if rot.shape != (3, 3) or tr.shape != (3,):
            raise ConfigError("camera rotation must be 3x3 and translation 3-vector")
        if np.abs(rot @ rot.T - np.eye(3)).max() > 1e-6:
            raise ConfigError("camera rotation is not orthonormal (beyond 1e-6)")
        fx, fy = self.focal
        cx, cy = self.principal
        w, h = self.resolution
        if fx <= 0 or fy <= 0:
            raise ConfigError("focal lengths must be positive")
        if not (0 <= cx < w and 0 <= cy < h):
            raise ConfigError("principal point must lie inside the image")

    @property
    def center(self) -> np.ndarray:
        """Camera position in world space."""
        return -self.rotation.T @ self.translation

    def ray_directions(self) -> np.ndarray:
        """World-space unit ray direction through every pixel center, (H, W, 3)."""
        w, h = self.resolution
        fx, fy = self.focal
        cx, cy = self.principal
        xs = (np.arange(w, dtype=np.float64) - cx) / fx
        ys = (np.arange(h, dtype=np.float64) - cy) / fy
        d = np.empty((h, w, 3), dtype=np.float64)
        d[:, :, 0] = xs[None, :]
        d[:, :, 1] = ys[:, None]
        d[:, :, 2] = 1.0
        d /= np.linalg.norm(d, axis=2, keepdims=True)
        return d @ self.rotation  # row vectors times R == R^T @ d

    def to_dict(self) -> dict:
        return {
            "fx": self.focal[0], "fy": self.focal[1],
            "cx": self.principal[0], "cy": self.principal[1],
            "width": self.resolution[0], "height": self.resolution[1],
            "rotation": [float(x) for x in self.rotation.reshape(-1)],
            "translation": [float(x) for x in self.translation],
        }


def _camera_from_view(entry: dict, index: int) -> Camera:
    try:
        rot = np.asarray(entry["rotation"], dtype=np.float64).reshape(3, 3)
        tr = np.asarray(entry["translation"], dtype=np.float64)
        fx, fy = float(entry["fx"]), float(entry["fy"])
        cx, cy = float(entry["cx"]), float(entry["cy"])
        w, h = int(entry["width"]), int(entry["height"])
    except (KeyError, ValueError, TypeError) as e:
        raise ConfigError(f"view {index}: bad camera parameters: {e}") from e
    deviation = np.abs(rot @ rot.T - np.eye(3)).max()
    if deviation > _ROTATION_TOL:
        raise ConfigError(
            f"view {index}: rotation is not orthonormal (deviation {deviation:.2e})")
    # Snap to the nearest rotation so downstream math sees an exact one.
    u, _, vt = np.linalg.svd(rot)
    rot = u @ vt
    if np.linalg.det(rot) < 0:
        raise ConfigError(f"view {index}: rotation has negative determinant")
    return Camera(rot, tr, (fx, fy), (cx, cy), (w, h))


@dataclass(frozen=True)
class SceneDescription:
    mesh: TriangleMesh
    cameras: list[Camera]
    images: list[RadianceImage]
    point_lights: list[PointLight]
    sg_lights: list[SGLight]
    atlas_resolution: int
    seed: int = 0
    gamma_flags: list[bool] = field(default_factory=list)
    predictor_cfg: dict = field(default_factory=dict)
    bilateral_cfg: dict = field(default_factory=dict)
    mesh_path: str | None = None
    image_paths: list[str] = field(default_factory=list)

    @property
    def num_views(self) -> int:
        return len(self.cameras)

    @property
    def visibility_bias(self) -> float:
        """Shadow-ray slack absorbing retopology/calibration mismatch."""
        return 1e-3 * self.mesh.diagonal


def load_scene_config(path) -> SceneDescription:
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e

    base = path.parent
    if "mesh" not in cfg:
        raise ConfigError(f"{path}: missing 'mesh' key")
    views = cfg.get("views")
    if not isinstance(views, list) or not views:
        raise ConfigError(f"{path}: 'views' must be a non-empty list")

    n_cameras = sum(1 for v in views if "rotation" in v)
    n_images = sum(1 for v in views if "image" in v)
    if n_cameras != n_images or n_cameras != len(views):
        raise ConfigError(
            f"{path}: camera/image count mismatch ({n_cameras} cameras, {n_images} images)")

    mesh_path = base / cfg["mesh"]
    mesh = load_mesh(mesh_path)

    cameras, images, gammas, image_paths = [], [], [], []
    for i, entry in enumerate(views):
        cam = _camera_from_view(entry, i)
        img_path = base / entry["image"]
        gamma = bool(entry.get("gamma", False))
        img = load_image(img_path, gamma_encoded=gamma)
        if (img.width, img.height) != cam.resolution:
            raise ConfigError(
                f"view {i}: image is {img.width}x{img.height} but camera expects "
                f"{cam.resolution[0]}x{cam.resolution[1]}")
        cameras.append(cam)
        images.append(img)
        gammas.append(gamma)
        image_paths.append(str(entry["image"]))

    point_lights, sg_lights = [], []
    for j, entry in enumerate(cfg.get("lights", [])):
        kind = entry.get("type")
        try:
            if kind == "point":
                point_lights.append(PointLight(np.asarray(entry["position"], dtype=np.float64),
                                               np.asarray(entry["intensity"], dtype=np.float64)))
            elif kind == "sg":
                sg_lights.append(SGLight(np.asarray(entry["axis"], dtype=np.float64),
                                         float(entry["sharpness"]),
                                         np.asarray(entry["amplitude"], dtype=np.float64)))
            else:
                raise ConfigError(f"light {j}: unknown type {kind!r}")
        except (KeyError, ValueError) as e:
            raise ConfigError(f"light {j}: {e}") from e

    return SceneDescription(
        mesh=mesh,
        cameras=cameras,
        images=images,
        point_lights=point_lights,
        sg_lights=sg_lights,
        atlas_resolution=int(cfg.get("atlas_resolution", 1024)),
        seed=int(cfg.get("seed", 0)),
        gamma_flags=gammas,
        predictor_cfg=dict(cfg.get("predictor", {})),
        bilateral_cfg=dict(cfg.get("bilateral", {})),
        mesh_path=str(cfg["mesh"]),
        image_paths=image_paths,
    )


def save_scene_config(scene: SceneDescription, path) -> None:
    """Write the config JSON; mesh/image files are referenced, not copied."""
    if scene.mesh_path is None or len(scene.image_paths) != scene.num_views:
        raise ConfigError("scene has no source file paths to reference")
    views = []
    for cam, img_path, gamma in zip(scene.cameras, scene.image_paths, scene.gamma_flags):
        entry = cam.to_dict()
        entry["image"] = img_path
        entry["gamma"] = gamma
        views.append(entry)
    lights = [
        {"type": "point",
         "position": [float(x) for x in pl.position],
         "intensity": [float(x) for x in pl.intensity]}
        for pl in scene.point_lights
    ] + [
        {"type": "sg",
         "axis": [float(x) for x in sg.axis],
         "sharpness": sg.sharpness,
         "amplitude": [float(x) for x in sg.amplitude]}
        for sg in scene.sg_lights
    ]
    cfg = {
        "mesh": scene.mesh_path,
        "atlas_resolution": scene.atlas_resolution,
        "seed": scene.seed,
        "views": views,
        "lights": lights,
        "predictor": scene.predictor_cfg,
        "bilateral": scene.bilateral_cfg,
    }
    Path(path).write_text(json.dumps(cfg, indent=2))
