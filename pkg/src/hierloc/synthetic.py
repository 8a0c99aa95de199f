"""Synthetic panoramic corpus for desk-scale runs.

Each room has its own block colour palette; along the trajectory every block
drifts linearly with the robot's position, so block-mean descriptors are
separable by room and ordered by pose within a room.
"""

import csv
from pathlib import Path

import numpy as np

from . import augment, imaging

ROOMS = ("1P0-A", "2P01-A", "2P02-A", "CR-A", "KT-A", "LO-A", "PA-A", "ST-A", "TL-A")
PALETTE_GRID = (8, 2)  # blocks across, blocks down
DRIFT = 60.0  # max intensity change per metre, per block and channel


def _room_style(seed, index, size):
    rng = np.random.default_rng([seed, index, 0xC01D])
    gx, gy = PALETTE_GRID
    palette = rng.uniform(50, 205, size=(gy, gx, 3))
    drift = rng.uniform(-DRIFT, DRIFT, size=(gy, gx, 3))
    w, h = size
    texture = rng.uniform(-8, 8, size=(h, w, 3))
    return palette, drift, texture


def _upsample(blocks, size):
    w, h = size
    gy, gx = blocks.shape[:2]
    rows = (np.arange(h) * gy) // h
    cols = (np.arange(w) * gx) // w
    return blocks[rows][:, cols]


def render(seed, room_index, u, size=(128, 32), noise_key=0, condition="cloudy"):
    """Panorama of room ``room_index`` at trajectory coordinate ``u`` metres."""
    palette, drift, texture = _room_style(seed, room_index, size)
    w, h = size
    base = _upsample(palette + drift * u, size) + texture
    rng = np.random.default_rng([seed, room_index, noise_key, 0xBEEF])
    img = imaging.to_u8(base + rng.uniform(-2, 2, size=(h, w, 3)))
    if condition == "night":
        img = augment.apply_darkness(img, 1)
    elif condition == "sunny":
        img = augment.apply_spotlight(augment.apply_brightness(img, 1), 3, seed, f"sun{noise_key}")
    return img


def write_corpus(root, per_room=10, spacing=0.1, offset=0.0, size=(128, 32), seed=0,
                 condition="cloudy", rooms=ROOMS, noise_base=0):
    """Write a directory-per-room corpus with ``poses.csv`` sidecars.

    Room ``i`` occupies the strip ``x in [10 i, 10 i + per_room * spacing)``;
    poses advance by ``spacing`` starting at ``offset``.
    """
    root = Path(root)
    for i, room in enumerate(rooms):
        room_dir = root / room
        room_dir.mkdir(parents=True, exist_ok=True)
        rows = []
        for k in range(per_room):
            u = offset + k * spacing
            name = f"{condition}_{k:04d}.png"
            img = render(seed, i, u, size, noise_key=noise_base + k, condition=condition)
            imaging.save(img, room_dir / name)
            rows.append((name, repr(10.0 * i + u), "0.0", condition))
        sidecar = room_dir / "poses.csv"
        # several conditions may share a room directory
        fresh = not sidecar.exists()
        with open(sidecar, "a", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if fresh:
                w.writerow(["filename", "x", "y", "condition"])
            w.writerows(rows)
    return root


def write_experiment(root, per_room=10, spacing=0.1, size=(128, 32), seed=0,
                     test_conditions=("cloudy",)):
    """Training trajectory under ``root/train`` and held-out queries under
    ``root/test`` (poses offset by half a step, fresh sensor noise)."""
    root = Path(root)
    write_corpus(root / "train", per_room, spacing, 0.0, size, seed, "cloudy")
    for j, cond in enumerate(test_conditions):
        write_corpus(root / "test", per_room - 1, spacing, spacing / 2, size, seed, cond,
                     noise_base=10_000 * (j + 1))
    return root / "train", root / "test"
