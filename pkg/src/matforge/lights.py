"""Light source types shared by shading, scene config, and the re-renderer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SGLight:
    """Spherical Gaussian lobe a * exp(sharpness * (dot(w, axis) - 1))."""

    axis: np.ndarray       # (3,) unit
    sharpness: float       # >= 0
    amplitude: np.ndarray  # (3,) RGB >= 0

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=np.float64)
        amp = np.asarray(self.amplitude, dtype=np.float64)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "sharpness", float(self.sharpness))
        if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1.0) > 1e-6:
            raise ValueError("SG axis must be a unit 3-vector")
        if not np.isfinite(self.sharpness) or self.sharpness < 0:
            raise ValueError("SG sharpness must be finite and >= 0")
        if amp.shape != (3,) or amp.min() < 0 or not np.all(np.isfinite(amp)):
            raise ValueError("SG amplitude must be non-negative RGB")


@dataclass(frozen=True)
class PointLight:
    """World-space point emitter; irradiance falls off as 1/distance^2."""

    position: np.ndarray   # (3,) meters
    intensity: np.ndarray  # (3,) RGB radiant intensity

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64)
        intens = np.asarray(self.intensity, dtype=np.float64)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "intensity", intens)
        if pos.shape != (3,) or intens.shape != (3,):
            raise ValueError("position and intensity must be 3-vectors")
        if intens.min() < 0 or not np.all(np.isfinite(intens)):
            raise ValueError("intensity must be non-negative and finite")
