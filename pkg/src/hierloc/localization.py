"""Coarse-to-fine localization against a visual map.

The coarse stage predicts the room; the fine stage returns the pose of the
nearest map descriptor (Euclidean) inside that room. ``localize_global``
searches the whole map instead and serves as the flat baseline.
"""

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .classifier import predict_room

MODES = ("hierarchical", "global")
RESULTS_HEADER = [
    "query_id", "mode", "pred_room", "true_room", "match_id",
    "x_est", "y_est", "x_true", "y_true", "distance", "elapsed_ms",
]


class LocalizationError(Exception):
    pass


def euclidean(d1, d2):
    """Euclidean distance with float64 accumulation."""
    d1 = np.asarray(d1, dtype=np.float32).reshape(1, -1)
    d2 = np.asarray(d2, dtype=np.float64).reshape(-1)
    if d1.shape[1] != d2.shape[0]:
        raise ValueError(f"dimension mismatch: {d1.shape[1]} vs {d2.shape[0]}")
    return math.sqrt(kernels.sq_dists(kernels.prepare_rows(d1), d2)[0])


@dataclass(frozen=True, eq=False)
class RoomMap:
    room: str
    ids: tuple
    poses: np.ndarray
    values: np.ndarray
    rows: object  # kernel search layout of ``values``

    def __len__(self):
        return len(self.ids)


class VisualMap:
    """Per-room (descriptor, pose) collections, entries sorted by id."""

    def __init__(self, descriptors, manifest):
        ds = descriptors.align(manifest)
        if len(ds) == 0:
            raise LocalizationError("visual map is empty")
        self.dim = ds.dim
        groups = {}
        for k, r in enumerate(manifest.records):
            groups.setdefault(r.room, []).append((r.id, k, r.pose_x, r.pose_y))
        self.rooms = {}
        for room in sorted(groups):
            entries = sorted(groups[room])
            idx = [e[1] for e in entries]
            values = ds.values[idx]
            self.rooms[room] = RoomMap(
                room=room,
                ids=tuple(e[0] for e in entries),
                poses=np.array([(e[2], e[3]) for e in entries], dtype=np.float64),
                values=values,
                rows=kernels.prepare_rows(values),
            )
        self._flat = None

    def __len__(self):
        return sum(len(r) for r in self.rooms.values())

    def flat(self):
        """All entries concatenated in room order (for global search)."""
        if self._flat is None:
            rooms = list(self.rooms.values())
            owner = [(rm.room, j) for rm in rooms for j in range(len(rm))]
            values = np.concatenate([rm.values for rm in rooms])
            self._flat = (owner, kernels.prepare_rows(values))
        return self._flat


@dataclass
class LocalizationResult:
    query_id: str
    mode: str
    predicted_room: str | None
    distances: np.ndarray | None
    k: int
    match_id: str | None
    x_est: float
    y_est: float
    elapsed_ms: float = 0.0
    error: str | None = None

    @property
    def distance(self):
        return float(self.distances[self.k]) if self.distances is not None else math.nan

    @property
    def ok(self):
        return self.error is None


def _classify(model, d):
    if callable(model):
        return model(d)
    return predict_room(model, d)[0]


def _search(rows, d):
    dist = np.sqrt(kernels.sq_dists(rows, d))
    return dist, int(np.argmin(dist))


def _query(d, dim):
    d = np.asarray(d, dtype=np.float32).astype(np.float64).reshape(-1)
    if d.shape[0] != dim:
        raise LocalizationError(f"query dim {d.shape[0]} does not match map dim {dim}")
    return d


def localize_hierarchical(model, vmap, d_test, query_id=""):
    """Predict the room, then take the nearest map entry within it.

    ``model`` is a :class:`SoftmaxModel` or any callable mapping a descriptor
    to a room label. Ties in distance resolve to the lowest entry index.
    """
    d = _query(d_test, vmap.dim)
    room = _classify(model, d)
    if room not in vmap.rooms:
        raise LocalizationError(f"predicted room {room!r} is not in the visual map")
    rm = vmap.rooms[room]
    dist, k = _search(rm.rows, d)
    x, y = rm.poses[k]
    return LocalizationResult(query_id, "hierarchical", room, dist, k, rm.ids[k], float(x), float(y))


def localize_global(vmap, d_test, query_id=""):
    """Nearest neighbour over every room of the map."""
    d = _query(d_test, vmap.dim)
    owner, rows = vmap.flat()
    dist, k = _search(rows, d)
    room, j = owner[k]
    rm = vmap.rooms[room]
    x, y = rm.poses[j]
    return LocalizationResult(query_id, "global", room, dist, k, rm.ids[j], float(x), float(y))


def localize(model, vmap, d, mode="hierarchical", query_id=""):
    if mode == "hierarchical":
        return localize_hierarchical(model, vmap, d, query_id)
    if mode == "global":
        return localize_global(vmap, d, query_id)
    raise ValueError(f"unknown localization mode {mode!r}")


def _timed(model, vmap, d, mode, query_id):
    start = time.perf_counter_ns()
    try:
        res = localize(model, vmap, d, mode, query_id)
    except (LocalizationError, ValueError) as exc:
        res = LocalizationResult(query_id, mode, None, None, -1, None, math.nan, math.nan, error=str(exc))
    elapsed = max(time.perf_counter_ns() - start, 1)
    res.elapsed_ms = elapsed / 1e6
    return res


def batch_localize(model, vmap, queries, mode="hierarchical", threads=1):
    """Localize every row of a descriptor set, timing each query separately.

    Failures are returned as results with ``error`` set; output order follows
    ``queries``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown localization mode {mode!r}")
    jobs = list(zip(queries.ids, queries.values))
    if threads <= 1:
        return [_timed(model, vmap, d, mode, qid) for qid, d in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: _timed(model, vmap, job[1], mode, job[0]), jobs))


def _fmt(v):
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def write_results(results, truth, path):
    """Results CSV joined with ground truth from the ``truth`` manifest."""
    by_id = truth.by_id() if truth is not None else {}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULTS_HEADER)
        for res in results:
            t = by_id.get(res.query_id)
            w.writerow([
                res.query_id, res.mode, res.predicted_room or "", t.room if t else "",
                res.match_id or "", _fmt(res.x_est), _fmt(res.y_est),
                _fmt(t.pose_x if t else None), _fmt(t.pose_y if t else None),
                _fmt(res.distance), f"{res.elapsed_ms:.6f}",
            ])
