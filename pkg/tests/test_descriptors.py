import struct

import numpy as np
import pytest
from PIL import Image

from fixlab import binio
from fixlab.descriptors import (
    DescriptorGridConfig, DescriptorSet, dense_descriptors, grid_origins, load_descriptors,
    load_image, save_descriptors,
)
from fixlab.errors import FormatError, ValidationError


def test_constant_image_gives_zero_vectors():
    ds = dense_descriptors(np.full((40, 48), 0.7))
    assert ds.vectors.shape == (4 * 5, 128)
    assert not ds.vectors.any()


def test_single_patch():
    ds = dense_descriptors(np.random.default_rng(0).random((16, 16)))
    assert len(ds) == 1
    np.testing.assert_allclose(ds.centers, [[8.0, 8.0]])
    assert np.linalg.norm(ds.vectors[0]) == pytest.approx(1.0)


@pytest.mark.parametrize("w,h", [(16, 16), (17, 40), (64, 33), (100, 100)])
def test_descriptor_count(w, h):
    cfg = DescriptorGridConfig()
    ds = dense_descriptors(np.zeros((h, w)), cfg)
    assert len(ds) == ((w - 16) // 8 + 1) * ((h - 16) // 8 + 1)


def test_vertical_step_edge_horizontal_gradient():
    img = np.zeros((16, 16))
    img[:, 8:] = 1.0
    vec = dense_descriptors(img).vectors[0].reshape(16, 8)
    per_bin = (vec ** 2).sum(axis=0)
    # gradient points along +x: orientation 0, so bin 0 holds all the mass
    assert per_bin[0] == pytest.approx(1.0)
    assert per_bin[1:].sum() == pytest.approx(0.0, abs=1e-12)


def test_too_small_image():
    with pytest.raises(ValidationError):
        dense_descriptors(np.zeros((10, 30)))


def test_brute_force_histogram(rng):
    img = rng.random((20, 24))
    cfg = DescriptorGridConfig(8, 4, 2, 4)
    ds = dense_descriptors(img, cfg)
    gx = np.zeros_like(img)
    gy = np.zeros_like(img)
    p = np.pad(img, 1, mode="edge")
    for y in range(20):
        for x in range(24):
            gx[y, x] = (p[y + 1, x + 2] - p[y + 1, x]) / 2
            gy[y, x] = (p[y + 2, x + 1] - p[y, x + 1]) / 2
    xs, ys = grid_origins(24, 20, cfg)
    k = 0
    for oy in ys:
        for ox in xs:
            hist = np.zeros((2, 2, 4))
            for y in range(oy, oy + 8):
                for x in range(ox, ox + 8):
                    ang = np.arctan2(gy[y, x], gx[y, x]) % (2 * np.pi)
                    pos = ang / (2 * np.pi) * 4
                    b = int(np.floor(pos)) % 4
                    f = pos - np.floor(pos)
                    m = np.hypot(gx[y, x], gy[y, x])
                    hist[(y - oy) // 4, (x - ox) // 4, b] += m * (1 - f)
                    hist[(y - oy) // 4, (x - ox) // 4, (b + 1) % 4] += m * f
            ref = hist.ravel() / np.linalg.norm(hist)
            np.testing.assert_allclose(ds.vectors[k], ref, atol=1e-9)
            k += 1


def test_load_image_modes(tmp_path):
    gray = np.arange(64, dtype=np.uint8).reshape(8, 8)
    Image.fromarray(gray).save(tmp_path / "g.pgm")
    np.testing.assert_allclose(load_image(tmp_path / "g.pgm"), gray / 255)
    rgb = np.zeros((4, 4, 3), dtype=np.uint8)
    rgb[..., 1] = 255
    Image.fromarray(rgb).save(tmp_path / "c.ppm")
    np.testing.assert_allclose(load_image(tmp_path / "c.ppm"), 0.587)


def test_descriptor_file_round_trip(tmp_path, rng):
    sets = [DescriptorSet("a", rng.random((2, 2)), rng.random((2, 128))),
            DescriptorSet("b", np.zeros((0, 2)), np.zeros((0, 128)))]
    save_descriptors(sets, tmp_path / "d.gdsc")
    back = load_descriptors(tmp_path / "d.gdsc")
    assert [s.image_id for s in back] == ["a", "b"]
    assert len(back[0]) == 2 and len(back[1]) == 0
    np.testing.assert_allclose(back[0].vectors, sets[0].vectors, rtol=1e-6)


def test_dimension_mismatch_rejected(tmp_path):
    good = binio.encode_descriptors([("a", np.zeros((1, 2)), np.ones((1, 3)))], 3)
    bad = b"GDSC" + struct.pack("<I", 4) + good[8:]
    (tmp_path / "x.gdsc").write_bytes(bad)
    with pytest.raises(FormatError):
        load_descriptors(tmp_path / "x.gdsc")


def test_bad_magic(tmp_path):
    (tmp_path / "x.gdsc").write_bytes(b"NOPE" + bytes(8))
    with pytest.raises(FormatError):
        load_descriptors(tmp_path / "x.gdsc")
