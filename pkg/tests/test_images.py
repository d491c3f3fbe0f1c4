import numpy as np
import pytest
from PIL import Image

from matforge.errors import ImageError
from matforge.images import RadianceImage, load_image, read_pfm, save_image, write_pfm


def test_png_endpoints_and_gamma(tmp_path):
    data = np.zeros((2, 2, 3), dtype=np.uint8)
    data[0, 0] = 255
    data[0, 1] = 128
    Image.fromarray(data, "RGB").save(tmp_path / "a.png")
    img = load_image(tmp_path / "a.png", gamma_encoded=True)
    assert img.pixels[0, 0, 0] == pytest.approx(1.0, abs=1e-6)
    assert img.pixels[0, 1, 0] == pytest.approx((128 / 255) ** 2.2, abs=1e-6)
    assert img.mask.all()


def test_pfm_hdr_passthrough(tmp_path):
    arr = np.full((3, 4, 3), 1.5, dtype=np.float32)
    write_pfm(tmp_path / "x.pfm", arr)
    img = load_image(tmp_path / "x.pfm")
    assert np.all(img.pixels == np.float32(1.5))


def test_pfm_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(3)
    arr = rng.random((7, 5, 3), dtype=np.float32) * 9.0 + 0.01
    img = RadianceImage(arr, np.ones((7, 5), dtype=bool))
    save_image(img, tmp_path / "r.pfm")
    back = load_image(tmp_path / "r.pfm")
    assert np.array_equal(back.pixels, img.pixels)
    assert back.mask.all()


def test_single_channel_pfm_roundtrip(tmp_path):
    rng = np.random.default_rng(4)
    arr = rng.random((6, 9), dtype=np.float32)
    write_pfm(tmp_path / "g.pfm", arr)
    assert np.array_equal(read_pfm(tmp_path / "g.pfm"), arr)


def test_png_roundtrip_quantization(tmp_path):
    rng = np.random.default_rng(5)
    arr = rng.random((4, 4, 3)).astype(np.float32)
    img = RadianceImage(arr, np.ones((4, 4), dtype=bool))
    save_image(img, tmp_path / "q.png")
    back = load_image(tmp_path / "q.png", gamma_encoded=True)
    assert np.abs(back.pixels - arr).max() < 1.5 / 255


def test_nan_and_negative_rejected(tmp_path):
    arr = np.ones((2, 2, 3), dtype=np.float32)
    arr[0, 0, 0] = np.nan
    write_pfm(tmp_path / "bad.pfm", arr)
    with pytest.raises(ImageError):
        load_image(tmp_path / "bad.pfm")
    arr[0, 0, 0] = -0.5
    write_pfm(tmp_path / "neg.pfm", arr)
    with pytest.raises(ImageError):
        load_image(tmp_path / "neg.pfm")


def test_zero_fill_marks_invalid(tmp_path):
    arr = np.ones((2, 2, 3), dtype=np.float32)
    arr[1, 1] = 0.0
    write_pfm(tmp_path / "z.pfm", arr)
    img = load_image(tmp_path / "z.pfm")
    assert img.mask[0, 0] and not img.mask[1, 1]


def test_png_alpha_mask(tmp_path):
    data = np.ones((2, 2, 4), dtype=np.uint8) * 200
    data[0, 1, 3] = 0
    Image.fromarray(data, "RGBA").save(tmp_path / "a.png")
    img = load_image(tmp_path / "a.png")
    assert img.mask[0, 0] and not img.mask[0, 1]


def test_unreadable_file(tmp_path):
    with pytest.raises(ImageError):
        load_image(tmp_path / "missing.pfm")
