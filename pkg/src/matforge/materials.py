"""Material parameter containers: per-point samples and per-view map rasters.

Convention: diffuse and specular albedo are RGB in [0, 1]; roughness is the
Beckmann width in (0, 1], stored as a scalar raster.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ImageError
from .images import read_pfm, write_pfm

MIN_ROUGHNESS = 0.01


@dataclass(frozen=True)
class MaterialSample:
    diffuse: np.ndarray   # (3,) in [0, 1]
    specular: np.ndarray  # (3,) in [0, 1]
    roughness: float      # in (0, 1]

    def __post_init__(self):
        d = np.asarray(self.diffuse, dtype=np.float64)
        s = np.asarray(self.specular, dtype=np.float64)
        object.__setattr__(self, "diffuse", d)
        object.__setattr__(self, "specular", s)
        if d.shape != (3,) or s.shape != (3,):
            raise ValueError("diffuse and specular must be RGB triples")
        if d.min() < 0 or d.max() > 1 or s.min() < 0 or s.max() > 1:
            raise ValueError("albedo components must lie in [0, 1]")
        if not (0.0 < self.roughness <= 1.0):
            raise ValueError(f"roughness must lie in (0, 1], got {self.roughness}")


@dataclass(frozen=True)
class MaterialMaps:
    """Diffuse/specular RGB and roughness rasters sharing one validity mask."""

    diffuse: np.ndarray    # (H, W, 3) float32
    specular: np.ndarray   # (H, W, 3) float32
    roughness: np.ndarray  # (H, W) float32
    mask: np.ndarray       # (H, W) bool

    def __post_init__(self):
        h, w = self.roughness.shape
        if self.diffuse.shape != (h, w, 3) or self.specular.shape != (h, w, 3):
            raise ValueError("material map resolutions disagree")
        if self.mask.shape != (h, w):
            raise ValueError("mask resolution disagrees with maps")

    @property
    def resolution(self) -> tuple[int, int]:
        """(width, height)."""
        return self.roughness.shape[1], self.roughness.shape[0]

    def sample_at(self, y: int, x: int) -> MaterialSample:
        return MaterialSample(
            diffuse=self.diffuse[y, x].astype(np.float64),
            specular=self.specular[y, x].astype(np.float64),
            roughness=float(self.roughness[y, x]),
        )


def clamp_maps(diffuse, specular, roughness, mask) -> MaterialMaps:
    """Project raw rasters into valid material ranges."""
    return MaterialMaps(
        diffuse=np.clip(diffuse, 0.0, 1.0).astype(np.float32),
        specular=np.clip(specular, 0.0, 1.0).astype(np.float32),
        roughness=np.clip(roughness, MIN_ROUGHNESS, 1.0).astype(np.float32),
        mask=np.asarray(mask, dtype=bool),
    )


def save_material_maps(maps: MaterialMaps, directory) -> None:
    """Write the PFM triple {diffuse,specular,roughness}.pfm into a directory.

    Invalid pixels are zero-filled; roughness of exactly 0 marks invalid on
    reload (valid roughness is always >= MIN_ROUGHNESS).
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    m3 = maps.mask[:, :, None]
    write_pfm(directory / "diffuse.pfm", np.where(m3, maps.diffuse, 0.0))
    write_pfm(directory / "specular.pfm", np.where(m3, maps.specular, 0.0))
    write_pfm(directory / "roughness.pfm", np.where(maps.mask, maps.roughness, 0.0))


def load_material_maps(directory) -> MaterialMaps:
    directory = Path(directory)
    diffuse = read_pfm(directory / "diffuse.pfm")
    specular = read_pfm(directory / "specular.pfm")
    roughness = read_pfm(directory / "roughness.pfm")
    if roughness.ndim != 2:
        raise ImageError(f"{directory}/roughness.pfm must be single-channel")
    mask = roughness > 0.0
    return MaterialMaps(diffuse, specular, roughness, mask)
