import colorsys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hierloc import imaging


def gray(w, h, value):
    return np.full((h, w, 3), value, dtype=np.uint8)


def test_check_panorama_rejects_bad_shapes():
    with pytest.raises(ValueError):
        imaging.check_panorama(np.zeros((4, 4), np.uint8))
    with pytest.raises(ValueError):
        imaging.check_panorama(np.zeros((0, 4, 3), np.uint8))
    with pytest.raises(TypeError):
        imaging.check_panorama(np.zeros((4, 4, 3), np.float32))


def test_resize_identity():
    p = np.random.default_rng(0).integers(0, 256, (5, 7, 3), dtype=np.uint8)
    assert np.array_equal(imaging.resize(p, 7, 5), p)


def test_resize_wraps_across_seam():
    # samples at x = 0, 0.5, 1, 1.5 of the cyclic signal [0, 255]
    p = np.array([[[0] * 3, [255] * 3]], dtype=np.uint8)
    out = imaging.resize(p, 4, 1)
    # 127.5 rounds half-to-even to 128
    assert out[0, :, 0].tolist() == [0, 128, 255, 128]


def test_resize_uniform_stays_uniform():
    out = imaging.resize(gray(13, 5, 77), 40, 9)
    assert out.shape == (9, 40, 3)
    assert np.all(out == 77)


def test_resize_rejects_zero():
    with pytest.raises(ValueError):
        imaging.resize(gray(4, 4, 0), 0, 3)


def test_hsv_known_values():
    h, s, v = imaging.rgb_to_hsv((255, 0, 0))
    assert (float(h), float(s), float(v)) == (0.0, 1.0, 1.0)
    h, s, v = imaging.rgb_to_hsv((128, 128, 128))
    assert (float(h), float(s)) == (0.0, 0.0)
    assert float(v) == pytest.approx(128 / 255)


def test_hsv_matches_colorsys(rng):
    px = rng.integers(0, 256, (500, 3))
    h, s, v = imaging.rgb_to_hsv(px)
    for (r, g, b), hh, ss, vv in zip(px, h, s, v):
        eh, es, ev = colorsys.rgb_to_hsv(r / 255, g / 255, b / 255)
        assert hh == pytest.approx(360 * eh, abs=1e-9)
        assert ss == pytest.approx(es, abs=1e-12)
        assert vv == pytest.approx(ev, abs=1e-12)


def test_hsv_roundtrip_on_cube_lattice():
    axis = np.arange(0, 256, 5)
    px = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    back = imaging.hsv_to_rgb(*imaging.rgb_to_hsv(px)).astype(int)
    assert np.max(np.abs(back - px)) <= 1


@settings(max_examples=300)
@given(st.tuples(*[st.integers(0, 255)] * 3))
def test_hsv_roundtrip_property(rgb):
    back = imaging.hsv_to_rgb(*imaging.rgb_to_hsv(rgb))
    assert np.max(np.abs(back.astype(int) - np.array(rgb))) <= 1


@pytest.mark.parametrize("value,delta,expected", [(200, 160, 255), (100, -160, 0), (64, 0, 64)])
def test_clamp_add(value, delta, expected):
    assert imaging.clamp_add(value, delta) == expected


@given(st.integers(0, 255), st.integers(0, 255), st.integers(-300, 300))
def test_clamp_add_monotone(a, b, delta):
    lo, hi = min(a, b), max(a, b)
    assert imaging.clamp_add(lo, delta) <= imaging.clamp_add(hi, delta)
    assert imaging.clamp_add(a, delta) <= imaging.clamp_add(a, delta + 1)


def test_circular_shift_is_cyclic(rng):
    p = rng.integers(0, 256, (3, 10, 3), dtype=np.uint8)
    assert np.array_equal(imaging.circular_shift(imaging.circular_shift(p, 3), 7), p)
    assert np.array_equal(imaging.circular_shift(p, 1)[:, 1], p[:, 0])


def test_png_roundtrip(tmp_path, rng):
    p = rng.integers(0, 256, (6, 9, 3), dtype=np.uint8)
    imaging.save(p, tmp_path / "a.png")
    assert np.array_equal(imaging.load(tmp_path / "a.png"), p)
