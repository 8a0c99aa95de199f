import hashlib
import math
from decimal import ROUND_HALF_EVEN, Decimal

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hierloc import augment, dataset, imaging

from .conftest import write_room

# Frozen output of the scalar oracle below for seed 12345, level 1, 64x64 zeros.
SPOT_GOLDEN_DISK = (54, 60, 29)
SPOT_GOLDEN_SHA256 = "9e8fd7f2f645c80ea1f6c22a950b780c642ebba433eb3fdabbf08b4e21270768"


def scalar_disk(img, cx, cy, diameter, delta):
    """Per-pixel reference: linear falloff from ``delta`` at the centre to 0 at the rim."""
    h, w = len(img), len(img[0])
    out = [[list(px) for px in row] for row in img]
    radius = diameter / 2
    for y in range(h):
        for x in range(w):
            dx = abs(x - cx)
            dx = min(dx, w - dx)
            d = math.sqrt(dx * dx + (y - cy) ** 2)
            if d < radius:
                k = round(delta * (1 - d / radius))
                out[y][x] = [min(255, max(0, v + k)) for v in out[y][x]]
    return np.array(out, dtype=np.uint8)


def test_spot_grid_endpoints():
    assert augment.SPOT_DELTAS[0] == 160
    assert augment.SPOT_DELTAS[-1] == 100
    assert len(augment.SPOT_DELTAS) == 5


def test_spotlight_golden():
    z = np.zeros((64, 64, 3), np.uint8)
    assert augment.draw_disk(z.shape, 1, 12345) == SPOT_GOLDEN_DISK
    out = augment.apply_spotlight(z, 1, 12345)
    assert hashlib.sha256(out.tobytes()).hexdigest() == SPOT_GOLDEN_SHA256
    cx, cy, _ = SPOT_GOLDEN_DISK
    assert out[cy, cx].tolist() == [160, 160, 160]
    assert out.max() == 160


@pytest.mark.parametrize("level", [1, 3, 5])
@pytest.mark.parametrize("seed", [0, 99])
def test_spotlight_and_shadow_match_scalar_oracle(rng, level, seed):
    p = rng.integers(0, 256, (20, 48, 3), dtype=np.uint8)
    cx, cy, d = augment.draw_disk(p.shape, level, seed, "img")
    delta = augment.SPOT_DELTAS[level - 1]
    assert np.array_equal(augment.apply_spotlight(p, level, seed, "img"),
                          scalar_disk(p.tolist(), cx, cy, d, delta))
    assert np.array_equal(augment.apply_shadow(p, level, seed, "img"),
                          scalar_disk(p.tolist(), cx, cy, d, -delta))


def test_spotlight_saturated_and_shadow_black():
    assert np.all(augment.apply_spotlight(np.full((16, 16, 3), 255, np.uint8), 1, 3) == 255)
    assert np.all(augment.apply_shadow(np.zeros((16, 16, 3), np.uint8), 1, 3) == 0)


def test_disk_diameter_range():
    ds = {augment.draw_disk((128, 512), 1, s)[2] for s in range(400)}
    assert min(ds) >= 15 and max(ds) <= 40
    assert len(ds) > 20


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**63 - 1), st.integers(1, 5), st.binary(min_size=48 * 3, max_size=48 * 3))
def test_spotlight_shadow_mirror(seed, level, raw):
    p = np.frombuffer(raw, np.uint8).reshape(4, 12, 3)
    lhs = augment.apply_spotlight(p, level, seed, "k")
    rhs = 255 - augment.apply_shadow(255 - p, level, seed, "k")
    assert np.array_equal(lhs, rhs)


def test_spotlight_deterministic_and_key_dependent():
    p = np.zeros((40, 120, 3), np.uint8)
    a = augment.apply_spotlight(p, 2, 5, "a")
    assert np.array_equal(a, augment.apply_spotlight(p, 2, 5, "a"))
    assert any(not np.array_equal(a, augment.apply_spotlight(p, 2, 5, f"b{i}")) for i in range(5))


@pytest.mark.parametrize("effect", ["spotlight", "shadow", "brightness", "darkness", "contrast",
                                    "saturation", "rotation"])
def test_level_out_of_range(effect):
    p = np.zeros((4, 4, 3), np.uint8)
    with pytest.raises(ValueError):
        augment.apply_effect(p, effect, 0)
    with pytest.raises(ValueError):
        augment.apply_effect(p, effect, augment.LEVELS[effect] + 1)


def test_gamma_endpoints_and_value():
    for g in augment.BRIGHTNESS_GAMMAS + augment.DARKNESS_GAMMAS + (0.5,):
        lut = augment.gamma_lut(g)
        assert lut[0] == 0 and lut[255] == 255
    # 255 * sqrt(64/255) = 127.75
    assert augment.gamma_lut(0.5)[64] == 128


def test_brightness_darkness_direction():
    v = np.arange(256, dtype=np.uint8).reshape(16, 16, 1).repeat(3, axis=2)
    for level in (1, 2, 3):
        assert np.all(augment.apply_brightness(v, level) >= v)
        assert np.all(augment.apply_darkness(v, level) <= v)
    full = np.full((3, 3, 3), 255, np.uint8)
    assert np.all(augment.apply_brightness(full, 3) == 255)


def oracle_contrast(i, c):
    exact = Decimal(64) + Decimal(str(c)) * (Decimal(i) - 64)
    return int(min(255, max(0, exact.quantize(Decimal(1), rounding=ROUND_HALF_EVEN))))


def test_contrast_scalar_values():
    assert augment.contrast_lut(2.0)[200] == 255
    assert augment.contrast_lut(1)[77] == 77
    for c in augment.CONTRAST_FACTORS:
        assert augment.contrast_lut(c)[64] == 64
    # 64 + 0.7 * 5 = 67.5 -> 68 (exact half, rounds to even)
    assert augment.contrast_lut(0.7)[69] == 68


@pytest.mark.parametrize("c", ["0.4", "0.7", "1.3", "1.6", "2.0", "1", "0.25", "3.3"])
def test_contrast_against_decimal_oracle(c):
    lut = augment.contrast_lut(float(c))
    assert [int(v) for v in lut] == [oracle_contrast(i, c) for i in range(256)]


def test_contrast_monotone():
    for c in augment.CONTRAST_FACTORS:
        assert np.all(np.diff(augment.contrast_lut(c).astype(int)) >= 0)


def test_saturation_gray_fixed_point():
    p = np.full((2, 2, 3), 90, np.uint8)
    for level in range(1, 6):
        assert np.array_equal(augment.apply_saturation(p, level), p)


def test_saturation_zero_factor_gives_gray():
    red = np.array([[[255, 0, 0]]], np.uint8)
    assert augment.scale_saturation(red, 0.0).tolist() == [[[255, 255, 255]]]


def test_saturation_clamps_at_one():
    p = np.array([[[200, 100, 100]]], np.uint8)  # S = 0.5
    out = augment.scale_saturation(p, 2.2)
    _, s, v = imaging.rgb_to_hsv(out)
    assert float(s[0, 0]) == pytest.approx(1.0)
    assert out.tolist() == [[[200, 0, 0]]]


def test_rotation_shift_values():
    assert augment.rotation_shift(512, 1) == 14
    assert augment.rotation_shift(512, 18) == 256
    p = np.random.default_rng(1).integers(0, 256, (4, 512, 3), dtype=np.uint8)
    twice = augment.apply_rotation(augment.apply_rotation(p, 18), 18)
    assert np.array_equal(twice, p)


def test_rotation_is_permutation():
    p = np.random.default_rng(2).integers(0, 256, (3, 36, 3), dtype=np.uint8)
    out = augment.apply_rotation(p, 5)
    assert sorted(map(tuple, out.reshape(-1, 3).tolist())) == sorted(map(tuple, p.reshape(-1, 3).tolist()))


@pytest.mark.parametrize("effect", list(augment.LEVELS))
def test_effects_preserve_shape(effect):
    p = np.random.default_rng(3).integers(0, 256, (10, 30, 3), dtype=np.uint8)
    for level in (1, augment.LEVELS[effect]):
        out = augment.apply_effect(p, effect, level, 4, "x")
        assert out.shape == p.shape and out.dtype == np.uint8


def test_recipe_sizes():
    sizes = {k: len(v) for k, v in augment.RECIPES.items()}
    assert sizes == {"spotlight": 5, "shadow": 5, "brightdark": 6, "contrast": 5,
                     "saturation": 5, "rotation": 35}
    assert len(augment.recipe_variants("rotation", levels=30)) == 30


def test_build_augmented_dataset(tmp_path):
    write_room(tmp_path / "c", "a", [(0.0, 0.0), (0.5, 0.2)], size=(36, 8), condition="night")
    m = dataset.ingest(tmp_path / "c")
    out = augment.build_augmented_dataset(m, "brightdark", 1, tmp_path / "aug")
    assert len(out) == 2 * 7
    assert out.split_tag == "augmented"
    src = m.by_id()
    for r in out.records:
        parent = src[r.id.split("~")[0]]
        assert (r.room, r.pose, r.condition) == (parent.room, parent.pose, parent.condition)
        assert imaging.load(r.path).shape == (8, 36, 3)
    first = imaging.load(out.records[0].path)
    assert np.array_equal(first, imaging.load(m.records[0].path))


def test_build_augmented_is_deterministic(tmp_path):
    write_room(tmp_path / "c", "a", [(0.0, 0.0), (0.5, 0.2), (1.0, 0.0)], size=(36, 8))
    m = dataset.ingest(tmp_path / "c")
    a = augment.build_augmented_dataset(m, "spotlight", 9, tmp_path / "a", threads=1)
    b = augment.build_augmented_dataset(m, "spotlight", 9, tmp_path / "b", threads=4)
    for ra, rb in zip(a.records, b.records):
        assert open(ra.path, "rb").read() == open(rb.path, "rb").read()


def test_build_augmented_unwritable(tmp_path):
    write_room(tmp_path / "c", "a", [(0.0, 0.0)], size=(8, 4))
    m = dataset.ingest(tmp_path / "c")
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(augment.AugmentError):
        augment.build_augmented_dataset(m, "contrast", 0, blocker / "sub")
