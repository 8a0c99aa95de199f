"""Pose-labelled image manifests: ingest, spatial downsampling, interleaved splits.

On-disk corpus layout::

    root/
      <room>/
        poses.csv        # filename,x,y[,condition][,timestamp]
        <image files>    # .png / .jpg / .jpeg

Manifests are written as UTF-8 CSV with header ``id,path,room,x,y,condition``.
"""

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from PIL import Image

CONDITIONS = ("cloudy", "night", "sunny")
SPLIT_TAGS = ("baseline", "validation", "test", "augmented")
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
POSE_SIDECAR = "poses.csv"
MANIFEST_HEADER = ["id", "path", "room", "x", "y", "condition"]

# Absolute slack on distance comparisons so that poses on a nominal grid
# (0.1, 0.2, ... accumulated in floating point) are not dropped.
DISTANCE_EPS = 1e-9


class DatasetError(Exception):
    pass


@dataclass(frozen=True)
class ImageRecord:
    id: str
    path: str
    room: str
    pose_x: float
    pose_y: float
    condition: str = "cloudy"
    timestamp: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.pose_x) and math.isfinite(self.pose_y)):
            raise DatasetError(f"record {self.id!r} has a non-finite pose")
        if self.condition not in CONDITIONS:
            raise DatasetError(f"record {self.id!r} has unknown condition {self.condition!r}")

    @property
    def pose(self):
        return (self.pose_x, self.pose_y)


@dataclass(frozen=True)
class Manifest:
    rooms: tuple
    records: tuple
    split_tag: str = "baseline"

    def __post_init__(self):
        object.__setattr__(self, "rooms", tuple(self.rooms))
        object.__setattr__(self, "records", tuple(self.records))
        if len(self.rooms) < 1:
            raise DatasetError("manifest needs at least one room")
        if len(set(self.rooms)) != len(self.rooms):
            raise DatasetError("duplicate room labels in manifest")
        if self.split_tag not in SPLIT_TAGS:
            raise DatasetError(f"unknown split tag {self.split_tag!r}")
        known = set(self.rooms)
        seen = set()
        for r in self.records:
            if r.room not in known:
                raise DatasetError(f"record {r.id!r} has room {r.room!r} outside the room list")
            if r.id in seen:
                raise DatasetError(f"duplicate record id {r.id!r}")
            seen.add(r.id)

    def __len__(self):
        return len(self.records)

    def room_index(self, room):
        """Class index of ``room``: its position in the sorted room list."""
        return self.rooms.index(room)

    def labels(self):
        index = {room: i for i, room in enumerate(self.rooms)}
        return [index[r.room] for r in self.records]

    def by_id(self):
        return {r.id: r for r in self.records}

    def with_records(self, records, split_tag=None):
        return Manifest(self.rooms, tuple(records), split_tag or self.split_tag)


def _check_image(path):
    try:
        with Image.open(path) as im:
            im.verify()
    except Exception as exc:
        raise DatasetError(f"unreadable image {path}: {exc}") from exc


def _read_sidecar(path):
    poses = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"filename", "x", "y"} - set(reader.fieldnames or ())
        if missing:
            raise DatasetError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            ts = row.get("timestamp")
            poses[row["filename"]] = (
                float(row["x"]),
                float(row["y"]),
                row.get("condition") or None,
                float(ts) if ts not in (None, "") else None,
            )
    return poses


def ingest(root, condition="cloudy", threads=None):
    """Build a manifest from a directory-per-room corpus.

    Record ids are ``<room>/<file stem>``. Within a room, records follow the
    sidecar timestamps when present, otherwise lexicographic file order.
    ``condition`` applies to rows whose sidecar has no ``condition`` column.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"corpus root {root} does not exist")

    rooms = sorted(d.name for d in root.iterdir() if d.is_dir())
    pending = []
    for room in rooms:
        room_dir = root / room
        images = sorted(
            f.name for f in room_dir.iterdir() if f.is_file() and f.suffix.lower() in IMAGE_SUFFIXES
        )
        if not images:
            continue
        sidecar = room_dir / POSE_SIDECAR
        poses = _read_sidecar(sidecar) if sidecar.exists() else {}
        entries = []
        for name in images:
            if name not in poses:
                raise DatasetError(f"no pose for image {room_dir / name}")
            x, y, cond, ts = poses[name]
            entries.append((ts, name, x, y, cond))
        if any(e[0] is not None for e in entries):
            if any(e[0] is None for e in entries):
                raise DatasetError(f"{sidecar}: timestamps must be given for all images or none")
            entries.sort(key=lambda e: (e[0], e[1]))
        for ts, name, x, y, cond in entries:
            path = (room_dir / name).resolve()
            pending.append(
                ImageRecord(
                    id=f"{room}/{Path(name).stem}",
                    path=path.as_posix(),
                    room=room,
                    pose_x=x,
                    pose_y=y,
                    condition=cond or condition,
                    timestamp=ts,
                )
            )

    if not pending:
        raise DatasetError("no records")

    with ThreadPoolExecutor(max_workers=worker_count(threads)) as pool:
        list(pool.map(_check_image, [r.path for r in pending]))

    used = sorted({r.room for r in pending})
    return Manifest(tuple(used), tuple(pending), "baseline")


def worker_count(threads=None):
    if threads is None:
        env = os.environ.get("HLOC_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def _greedy_keep(records, spacing):
    kept = []
    last = None
    for r in records:
        if last is None or math.dist(r.pose, last.pose) >= spacing - DISTANCE_EPS:
            kept.append(r)
            last = r
    return kept


def _per_room(records):
    groups = {}
    for r in records:
        groups.setdefault(r.room, []).append(r)
    return groups


def _check_spacing(spacing):
    if not spacing > 0 or not math.isfinite(spacing):
        raise ValueError(f"spacing must be a positive distance, got {spacing}")


def downsample_by_distance(m, spacing):
    """Greedy per-room thinning: keep the first record, then every record at
    least ``spacing`` metres from the previously kept one."""
    _check_spacing(spacing)
    keep = set()
    for group in _per_room(m.records).values():
        keep.update(r.id for r in _greedy_keep(group, spacing))
    return m.with_records([r for r in m.records if r.id in keep])


def interleave_validation(m, spacing):
    """Split into interleaved (train, val) manifests at ``spacing``.

    Records are thinned at half the spacing; within each room, kept records
    with odd index go to train and even index to validation.
    """
    _check_spacing(spacing)
    to_train, to_val = set(), set()
    for group in _per_room(m.records).values():
        for i, r in enumerate(_greedy_keep(group, spacing / 2.0)):
            (to_train if i % 2 else to_val).add(r.id)
    train = m.with_records([r for r in m.records if r.id in to_train], "baseline")
    val = m.with_records([r for r in m.records if r.id in to_val], "validation")
    return train, val


def room_histogram(m):
    counts = {room: 0 for room in m.rooms}
    for r in m.records:
        counts[r.room] += 1
    return counts


def write_manifest(m, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for r in m.records:
            writer.writerow([r.id, r.path, r.room, repr(float(r.pose_x)), repr(float(r.pose_y)), r.condition])


def read_manifest(path, split_tag="baseline"):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise DatasetError(f"{path}: expected header {','.join(MANIFEST_HEADER)}")
        records = [
            ImageRecord(id=row[0], path=row[1], room=row[2], pose_x=float(row[3]),
                        pose_y=float(row[4]), condition=row[5])
            for row in reader
            if row
        ]
    if not records:
        raise DatasetError(f"{path}: no records")
    rooms = sorted({r.room for r in records})
    return Manifest(tuple(rooms), tuple(records), split_tag)


def synthetic_manifest(counts, spacing=0.1, condition="cloudy"):
    """Manifest with the given per-room counts and collinear poses; no image files.

    Useful for count arithmetic where pixel content is irrelevant.
    """
    rooms = sorted(counts)
    records = []
    for room in rooms:
        for k in range(counts[room]):
            records.append(
                ImageRecord(id=f"{room}/{k:05d}", path="", room=room,
                            pose_x=k * spacing, pose_y=0.0, condition=condition)
            )
    return Manifest(tuple(rooms), tuple(records))

