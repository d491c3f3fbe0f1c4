class MatforgeError(Exception):
    """Base class for all matforge errors."""


class ConfigError(MatforgeError):
    """Scene configuration is missing, inconsistent, or references bad files."""


class MeshError(MatforgeError):
    """Mesh file cannot be parsed or violates geometric requirements."""


class ImageError(MatforgeError):
    """Image file cannot be read or contains invalid pixel data."""
