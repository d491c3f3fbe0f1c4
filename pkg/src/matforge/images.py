"""Image I/O: PFM (float HDR) and 8-bit PNG, with linearization on load.

In-memory convention: arrays are (height, width[, channels]) float32,
row 0 at the top. PFM files store rows bottom-to-top; readers/writers flip.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ImageError

GAMMA = 2.2


@dataclass(frozen=True)
class RadianceImage:
    """Linear-RGB raster with a per-pixel validity mask.

    pixels: (H, W, 3) float32, non-negative where valid.
    mask:   (H, W) bool, True = valid observation.
    """

    pixels: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ImageError(f"pixels must be (H, W, 3), got {self.pixels.shape}")
        if self.mask.shape != self.pixels.shape[:2]:
            raise ImageError("mask resolution does not match pixels")
        valid = self.pixels[self.mask]
        if valid.size and (not np.all(np.isfinite(valid)) or valid.min() < 0.0):
            raise ImageError("valid pixels must be finite and non-negative")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def read_pfm(path) -> np.ndarray:
    """Read a PFM file into a float32 array, (H, W, 3) for PF or (H, W) for Pf."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise ImageError(f"cannot read {path}: {e}") from e

    # Header: magic line, "width height" line, scale line; whitespace-delimited.
    tokens = []
    pos = 0
    while len(tokens) < 4:
        nxt = data.find(b"\n", pos)
        if nxt < 0:
            raise ImageError(f"{path}: truncated PFM header")
        tokens.extend(data[pos:nxt].split())
        pos = nxt + 1
    if len(tokens) != 4:
        raise ImageError(f"{path}: malformed PFM header")
    magic, w_s, h_s, scale_s = tokens
    if magic not in (b"PF", b"Pf"):
        raise ImageError(f"{path}: not a PFM file (magic {magic!r})")
    try:
        width, height, scale = int(w_s), int(h_s), float(scale_s)
    except ValueError as e:
        raise ImageError(f"{path}: malformed PFM header") from e
    channels = 3 if magic == b"PF" else 1
    count = width * height * channels
    dtype = "<f4" if scale < 0 else ">f4"
    raw = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    if raw.size != count:
        raise ImageError(f"{path}: PFM payload truncated")
    arr = raw.reshape(height, width, channels)[::-1].astype(np.float32)
    if abs(scale) not in (0.0, 1.0):
        arr = arr * np.float32(abs(scale))
    return arr[..., 0] if channels == 1 else arr


def write_pfm(path, array: np.ndarray) -> None:
    """Write a float array as little-endian PFM; (H, W) -> Pf, (H, W, 3) -> PF."""
    arr = np.asarray(array, dtype=np.float32)
    if arr.ndim == 2:
        magic = b"Pf"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        magic = b"PF"
    else:
        raise ImageError(f"unsupported array shape for PFM: {arr.shape}")
    h, w = arr.shape[:2]
    header = magic + f"\n{w} {h}\n-1.0\n".encode()
    payload = np.ascontiguousarray(arr[::-1]).astype("<f4").tobytes()
    Path(path).write_bytes(header + payload)


def load_image(path, gamma_encoded: bool = False) -> RadianceImage:
    """Load a PFM or PNG image as linear radiance.

    PNG values are scaled to [0, 1]; with gamma_encoded, each channel is then
    decoded as v ** 2.2. PFM values pass through unchanged (HDR preserved).
    Validity: a PNG alpha channel of 0, or a float pixel that is exactly
    (0, 0, 0), marks the pixel invalid; everything else is valid.
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pfm":
        arr = read_pfm(path)
        if arr.ndim == 2:
            arr = np.repeat(arr[:, :, None], 3, axis=2)
        if np.isnan(arr).any():
            raise ImageError(f"{path}: NaN pixels rejected")
        if arr.min() < 0.0:
            raise ImageError(f"{path}: negative pixels rejected")
        if gamma_encoded:
            arr = np.power(arr, np.float32(GAMMA))
        mask = ~np.all(arr == 0.0, axis=2)
        return RadianceImage(arr.astype(np.float32), mask)
    if suffix == ".png":
        try:
            with Image.open(path) as im:
                im.load()
                has_alpha = "A" in im.getbands()
                rgba = im.convert("RGBA") if has_alpha else im.convert("RGB")
                raw = np.asarray(rgba, dtype=np.float32)
        except OSError as e:
            raise ImageError(f"cannot read {path}: {e}") from e
        rgb = raw[..., :3] / np.float32(255.0)
        if gamma_encoded:
            rgb = np.power(rgb, np.float32(GAMMA))
        mask = raw[..., 3] > 0 if has_alpha else np.ones(rgb.shape[:2], dtype=bool)
        return RadianceImage(rgb.astype(np.float32), mask)
    raise ImageError(f"{path}: unsupported image format (PFM or PNG expected)")


def save_image(image: RadianceImage, path) -> None:
    """Write a RadianceImage; .pfm stores raw floats, .png an 8-bit preview.

    Invalid pixels are written as zero. PNG output is display-encoded
    (clamp to [0, 1], then v ** (1/2.2)).
    """
    path = Path(path)
    pixels = np.where(image.mask[:, :, None], image.pixels, 0.0).astype(np.float32)
    suffix = path.suffix.lower()
    if suffix == ".pfm":
        write_pfm(path, pixels)
    elif suffix == ".png":
        write_png_preview(path, pixels, encode_gamma=True)
    else:
        raise ImageError(f"{path}: unsupported output format (PFM or PNG expected)")


def write_png_preview(path, array: np.ndarray, encode_gamma: bool = True) -> None:
    """Write an (H, W[, 3]) array in [0, inf) as an 8-bit PNG, clamped to [0, 1]."""
    arr = np.clip(np.asarray(array, dtype=np.float64), 0.0, 1.0)
    if encode_gamma:
        arr = np.power(arr, 1.0 / GAMMA)
    data = np.round(arr * 255.0).astype(np.uint8)
    if data.ndim == 2:
        Image.fromarray(data, mode="L").save(path)
    else:
        Image.fromarray(data, mode="RGB").save(path)
