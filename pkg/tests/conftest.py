import csv
from pathlib import Path

import numpy as np
import pytest

from hierloc import imaging

BASELINE_COUNTS = {
    "1P0-A": 44, "2P01-A": 46, "2P02-A": 31, "CR-A": 238, "KT-A": 46,
    "LO-A": 26, "PA-A": 57, "ST-A": 30, "TL-A": 38,
}


def write_room(root, room, poses, size=(8, 4), seed=0, condition=None):
    """Write one room directory with random images and a pose sidecar."""
    rng = np.random.default_rng(seed)
    room_dir = Path(root) / room
    room_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for k, (x, y) in enumerate(poses):
        name = f"img_{k:04d}.png"
        imaging.save(rng.integers(0, 256, size=(size[1], size[0], 3), dtype=np.uint8), room_dir / name)
        rows.append([name, repr(float(x)), repr(float(y))] + ([condition] if condition else []))
    with open(room_dir / "poses.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["filename", "x", "y"] + (["condition"] if condition else []))
        w.writerows(rows)
    return room_dir


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def small_corpus(tmp_path):
    root = tmp_path / "corpus"
    write_room(root, "kitchen", [(0.1 * k, 0.0) for k in range(6)], seed=1)
    write_room(root, "office", [(5.0, 0.1 * k) for k in range(4)], seed=2)
    return root
