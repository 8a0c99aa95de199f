"""Lighting and orientation effects for panoramic training images.

Each effect takes a panorama and a level index into a fixed parameter grid.
Spotlight and shadow are the only random effects; their RNG stream is derived
from ``(seed, image key, level)`` so results do not depend on processing order.
"""

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import imaging
from .dataset import ImageRecord, worker_count

log = logging.getLogger(__name__)

SPOT_DELTAS = (160, 145, 130, 115, 100)
SPOT_DIAMETER = (15, 40)
BRIGHTNESS_GAMMAS = (0.8, 0.6, 0.4)
DARKNESS_GAMMAS = (1.25, 1.67, 2.5)
CONTRAST_FACTORS = (Fraction(2, 5), Fraction(7, 10), Fraction(13, 10), Fraction(8, 5), Fraction(2))
CONTRAST_PIVOT = 64
SATURATION_FACTORS = (0.2, 0.6, 1.4, 1.8, 2.2)
ROTATION_STEP_DEG = 10
ROTATION_LEVELS = 35

LEVELS = {
    "spotlight": len(SPOT_DELTAS),
    "shadow": len(SPOT_DELTAS),
    "brightness": len(BRIGHTNESS_GAMMAS),
    "darkness": len(DARKNESS_GAMMAS),
    "contrast": len(CONTRAST_FACTORS),
    "saturation": len(SATURATION_FACTORS),
    "rotation": ROTATION_LEVELS,
}

# Dataset recipes: which (effect, level) variants accompany each original.
RECIPES = {
    "spotlight": [("spotlight", i) for i in range(1, 6)],
    "shadow": [("shadow", i) for i in range(1, 6)],
    "brightdark": [("brightness", i) for i in range(1, 4)] + [("darkness", i) for i in range(1, 4)],
    "contrast": [("contrast", i) for i in range(1, 6)],
    "saturation": [("saturation", i) for i in range(1, 6)],
    "rotation": [("rotation", i) for i in range(1, ROTATION_LEVELS + 1)],
}


class AugmentError(Exception):
    pass


@dataclass(frozen=True)
class AugmentSpec:
    effect: str
    level: int
    seed: int = 0

    def __post_init__(self):
        check_level(self.effect, self.level)


def check_level(effect, level):
    if effect not in LEVELS:
        raise ValueError(f"unknown effect {effect!r}")
    if not isinstance(level, (int, np.integer)) or not 1 <= level <= LEVELS[effect]:
        raise ValueError(f"{effect} level must be in 1..{LEVELS[effect]}, got {level!r}")


def effect_rng(seed, key, level):
    """Independent generator for one (seed, image, level) triple."""
    digest = hashlib.blake2b(str(key).encode("utf-8"), digest_size=8).digest()
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF, int.from_bytes(digest, "little"), int(level)]
    return np.random.default_rng(np.random.SeedSequence(words))


def draw_disk(shape, level, seed, key=""):
    """Disk placement for spotlight/shadow: ``(cx, cy, diameter)`` in pixels."""
    h, w = shape[:2]
    rng = effect_rng(seed, key, level)
    cx = int(rng.integers(0, w))
    cy = int(rng.integers(0, h))
    diameter = int(rng.integers(SPOT_DIAMETER[0], SPOT_DIAMETER[1] + 1))
    return cx, cy, diameter


def disk_offsets(shape, cx, cy, diameter, delta):
    """Integer per-pixel offsets of a linearly fading disk (0 outside).

    The horizontal distance wraps around the seam.
    """
    h, w = shape[:2]
    radius = diameter / 2.0
    dx = np.abs(np.arange(w, dtype=np.int64) - cx)
    dx = np.minimum(dx, w - dx)
    dy = np.arange(h, dtype=np.int64) - cy
    d = np.sqrt((dy[:, None] ** 2 + dx[None, :] ** 2).astype(np.float64))
    weight = np.where(d < radius, 1.0 - d / radius, 0.0)
    return np.rint(delta * weight).astype(np.int64)


def _apply_disk(p, level, seed, key, sign):
    p = imaging.check_panorama(p)
    check_level("spotlight", level)
    cx, cy, diameter = draw_disk(p.shape, level, seed, key)
    offsets = disk_offsets(p.shape, cx, cy, diameter, sign * SPOT_DELTAS[level - 1])
    return imaging.clamp_add(p, offsets[:, :, None])


def apply_spotlight(p, level, seed, key=""):
    """Brighten one randomly placed disk by up to ``SPOT_DELTAS[level-1]``."""
    return _apply_disk(p, level, seed, key, +1)


def apply_shadow(p, level, seed, key=""):
    """Darken one randomly placed disk; same placement as the spotlight."""
    return _apply_disk(p, level, seed, key, -1)


def gamma_lut(gamma):
    v = np.arange(256, dtype=np.float64)
    return imaging.to_u8(255.0 * np.power(v / 255.0, gamma))


def apply_brightness(p, level):
    p = imaging.check_panorama(p)
    check_level("brightness", level)
    return gamma_lut(BRIGHTNESS_GAMMAS[level - 1])[p]


def apply_darkness(p, level):
    p = imaging.check_panorama(p)
    check_level("darkness", level)
    return gamma_lut(DARKNESS_GAMMAS[level - 1])[p]


def _as_fraction(c):
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, np.integer)):
        return Fraction(int(c))
    return Fraction(repr(float(c)))


def contrast_lut(c):
    """Lookup table for ``64 + c * (I - 64)``, rounded half-to-even and clamped.

    ``c`` is handled as an exact rational so that half-way values round the
    same on every platform.
    """
    c = _as_fraction(c)
    if c <= 0:
        raise ValueError(f"contrast factor must be positive, got {c}")
    num, den = c.numerator, c.denominator
    t = num * (np.arange(256, dtype=np.int64) - CONTRAST_PIVOT)
    q, r = np.divmod(t, den)
    up = (2 * r > den) | ((2 * r == den) & (q % 2 == 1))
    return np.clip(CONTRAST_PIVOT + q + up, 0, 255).astype(np.uint8)


def apply_contrast(p, level):
    p = imaging.check_panorama(p)
    check_level("contrast", level)
    return contrast_lut(CONTRAST_FACTORS[level - 1])[p]


def scale_saturation(p, factor):
    if factor < 0:
        raise ValueError(f"saturation factor must be non-negative, got {factor}")
    p = imaging.check_panorama(p)
    h, s, v = imaging.rgb_to_hsv(p)
    return imaging.hsv_to_rgb(h, np.minimum(1.0, factor * s), v)


def apply_saturation(p, level):
    check_level("saturation", level)
    return scale_saturation(p, SATURATION_FACTORS[level - 1])


def rotation_shift(width, level):
    """Columns corresponding to ``level * 10`` degrees, rounded half-to-even."""
    check_level("rotation", level)
    return round(Fraction(width * ROTATION_STEP_DEG * level, 360))


def apply_rotation(p, level):
    p = imaging.check_panorama(p)
    return imaging.circular_shift(p, rotation_shift(p.shape[1], level))


def apply_effect(p, effect, level, seed=0, key=""):
    if effect == "spotlight":
        return apply_spotlight(p, level, seed, key)
    if effect == "shadow":
        return apply_shadow(p, level, seed, key)
    if effect == "brightness":
        return apply_brightness(p, level)
    if effect == "darkness":
        return apply_darkness(p, level)
    if effect == "contrast":
        return apply_contrast(p, level)
    if effect == "saturation":
        return apply_saturation(p, level)
    if effect == "rotation":
        return apply_rotation(p, level)
    raise ValueError(f"unknown effect {effect!r}")


def recipe_variants(recipe, levels=None):
    """The (effect, level) list of a recipe, optionally truncated to ``levels``."""
    if recipe not in RECIPES:
        raise ValueError(f"unknown recipe {recipe!r}; choose from {sorted(RECIPES)}")
    variants = RECIPES[recipe]
    if levels is not None:
        if not 0 <= levels <= len(variants):
            raise ValueError(f"{recipe} has {len(variants)} variants, asked for {levels}")
        variants = variants[:levels]
    return variants


def _variant_id(record_id, effect, level):
    return f"{record_id}~{effect}{level:02d}"


def _out_path(out_dir, record_id):
    return (Path(out_dir) / f"{record_id}.png").as_posix()


def plan_augmented(m, recipe, out_dir, levels=None):
    """Output manifest of :func:`build_augmented_dataset` without touching disk."""
    variants = recipe_variants(recipe, levels)
    records = []
    for r in m.records:
        records.append(_copy_record(r, r.id, _out_path(out_dir, r.id)))
        for effect, level in variants:
            vid = _variant_id(r.id, effect, level)
            records.append(_copy_record(r, vid, _out_path(out_dir, vid)))
    return m.with_records(records, "augmented")


def _copy_record(r, new_id, path):
    return ImageRecord(id=new_id, path=path, room=r.room, pose_x=r.pose_x,
                       pose_y=r.pose_y, condition=r.condition, timestamp=r.timestamp)


def build_augmented_dataset(m, recipe, seed, out_dir, levels=None, threads=None):
    """Write the original plus every recipe variant of each image as PNG.

    Returns the output manifest (split tag ``augmented``).
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise AugmentError(f"cannot create output directory {out_dir}: {exc}") from exc
    variants = recipe_variants(recipe, levels)
    out = plan_augmented(m, recipe, out_dir, levels)
    dest = iter(out.records)
    jobs = []
    for r in m.records:
        targets = [next(dest).path]
        targets += [next(dest).path for _ in variants]
        jobs.append((r, targets))

    def work(job):
        r, targets = job
        src = imaging.load(r.path)
        try:
            imaging.save(src, targets[0])
            for (effect, level), target in zip(variants, targets[1:]):
                imaging.save(apply_effect(src, effect, level, seed, r.id), target)
        except OSError as exc:
            raise AugmentError(f"cannot write augmented image for {r.id}: {exc}") from exc

    with ThreadPoolExecutor(max_workers=worker_count(threads)) as pool:
        list(pool.map(work, jobs))
    log.info("augmented %d images with %s -> %d records", len(m), recipe, len(out))
    return out
