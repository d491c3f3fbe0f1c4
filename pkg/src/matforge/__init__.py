"""matforge: multi-view SVBRDF atlas estimation for calibrated captures.

Turns calibrated photographs plus a clean UV-unwrapped triangle mesh into
diffuse/specular/roughness texture atlases ready for physically based
re-rendering.
"""

__version__ = "0.1.0"

from .errors import ConfigError, ImageError, MatforgeError, MeshError

__all__ = [
    "ConfigError",
    "ImageError",
    "MatforgeError",
    "MeshError",
    "__version__",
]
