"""Holistic image descriptors and the binary descriptor exchange format.

File layout (little-endian)::

    b"HLOC" | u32 version=1 | u32 count | u32 dim | count*dim float32 (row-major)

with a JSON sidecar ``{"ids": [...], "method": "...", "manifest": "..."}``
listing the row ids in order. External CNN embeddings enter through this
format; ``hog`` and ``blockmean`` are computed in-process.
"""

import json
import logging
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import imaging, kernels
from .dataset import worker_count

log = logging.getLogger(__name__)

MAGIC = b"HLOC"
VERSION = 1
_HEADER = struct.Struct("<4sIII")
METHODS = ("hog", "blockmean", "imported")

DEFAULT_HOG = {"cell": 16, "bins": 8}
DEFAULT_BLOCKMEAN = {"gw": 16, "gh": 4}


class DescriptorError(Exception):
    pass


@dataclass(frozen=True, eq=False)
class DescriptorSet:
    """Row-aligned descriptors: ``values[i]`` describes image ``ids[i]``."""

    method: str
    ids: tuple
    values: np.ndarray
    manifest: str = ""

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        if values.ndim != 2:
            raise DescriptorError(f"descriptor matrix must be 2-D, got shape {values.shape}")
        if values.shape[0] and values.shape[1] == 0:
            raise DescriptorError("descriptor dimension must be positive")
        if len(self.ids) != values.shape[0]:
            raise DescriptorError(f"{len(self.ids)} ids for {values.shape[0]} descriptor rows")
        if len(set(self.ids)) != len(self.ids):
            raise DescriptorError("duplicate ids in descriptor set")
        if self.method not in METHODS:
            raise DescriptorError(f"unknown descriptor method {self.method!r}")
        if not np.all(np.isfinite(values)):
            raise DescriptorError("descriptor values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "values", values)

    @property
    def dim(self):
        return self.values.shape[1]

    def __len__(self):
        return len(self.ids)

    def row(self, image_id):
        return self.values[self.ids.index(image_id)]

    def align(self, manifest):
        """Reorder rows to follow ``manifest``; ids must match one-to-one."""
        index = {i: k for k, i in enumerate(self.ids)}
        order = []
        for r in manifest.records:
            if r.id not in index:
                raise DescriptorError(f"no descriptor for manifest record {r.id!r}")
            order.append(index[r.id])
        if len(order) != len(self.ids):
            known = {r.id for r in manifest.records}
            extra = next(i for i in self.ids if i not in known)
            raise DescriptorError(f"descriptor id {extra!r} is not in the manifest")
        return DescriptorSet(self.method, tuple(r.id for r in manifest.records),
                             self.values[order], self.manifest)

    def l2_normalized(self):
        norms = np.linalg.norm(self.values.astype(np.float64), axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        return DescriptorSet(self.method, self.ids, self.values / norms, self.manifest)


def grayscale(p):
    p = imaging.check_panorama(p).astype(np.float64)
    return np.ascontiguousarray(0.299 * p[..., 0] + 0.587 * p[..., 1] + 0.114 * p[..., 2])


def describe_hog(p, cell=16, bins=8):
    """Histogram-of-oriented-gradients descriptor of a panorama.

    Orientation is that of the edge (perpendicular to the gradient), unsigned,
    binned over [0, 180) degrees. Cell histograms are L2-normalised in blocks
    of 2x2 cells tiling the image (edge blocks may be smaller); the output is
    ordered block row, block column, cell within block, bin, so its length is
    ``(W/cell) * (H/cell) * bins``.
    """
    p = imaging.check_panorama(p)
    h, w = p.shape[:2]
    if cell < 1 or bins < 1:
        raise ValueError("cell and bins must be positive")
    if h % cell or w % cell:
        raise ValueError(f"image {w}x{h} is not divisible into {cell}px cells")
    hist = kernels.hog_cell_histograms(grayscale(p), cell, bins)
    ch, cw = hist.shape[:2]
    parts = []
    for by in range(0, ch, 2):
        for bx in range(0, cw, 2):
            block = hist[by:by + 2, bx:bx + 2].reshape(-1)
            norm = np.sqrt(np.dot(block, block))
            parts.append(block / norm if norm > 0 else np.zeros_like(block))
    return np.concatenate(parts).astype(np.float32)


def _block_edges(n, k):
    return [(i * n) // k for i in range(k + 1)]


def describe_blockmean(p, gw=16, gh=4):
    """Per-block channel means in [0, 1], ordered block row, block column, channel."""
    p = imaging.check_panorama(p)
    if gw < 1 or gh < 1:
        raise ValueError("block grid must be at least 1x1")
    h, w = p.shape[:2]
    if gw > w or gh > h:
        raise ValueError(f"cannot split {w}x{h} image into {gw}x{gh} blocks")
    xs, ys = _block_edges(w, gw), _block_edges(h, gh)
    src = p.astype(np.float64)
    out = np.empty((gh, gw, 3), dtype=np.float64)
    for j in range(gh):
        for i in range(gw):
            out[j, i] = src[ys[j]:ys[j + 1], xs[i]:xs[i + 1]].mean(axis=(0, 1))
    return (out / 255.0).reshape(-1).astype(np.float32)


def describe(p, method, **params):
    if method == "hog":
        return describe_hog(p, **{**DEFAULT_HOG, **params})
    if method == "blockmean":
        return describe_blockmean(p, **{**DEFAULT_BLOCKMEAN, **params})
    raise ValueError(f"cannot compute descriptor method {method!r} in-process")


def describe_manifest(m, method, manifest_path="", threads=None, l2norm=False, **params):
    """Describe every record of ``m``; rows follow the manifest order."""

    def one(record):
        return describe(imaging.load(record.path), method, **params)

    with ThreadPoolExecutor(max_workers=worker_count(threads)) as pool:
        rows = list(pool.map(one, m.records))
    dims = {len(r) for r in rows}
    if len(dims) > 1:
        raise DescriptorError(f"images produced mixed descriptor dimensions {sorted(dims)}")
    values = np.stack(rows) if rows else np.zeros((0, 1), dtype=np.float32)
    ds = DescriptorSet(method, tuple(r.id for r in m.records), values, str(manifest_path))
    return ds.l2_normalized() if l2norm else ds


def sidecar_path(path):
    return Path(path).with_suffix(".json")


def export(ds, path, sidecar=None):
    """Write ``ds`` to ``path`` plus its JSON id sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count, dim = ds.values.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, count, dim))
        fh.write(ds.values.astype("<f4", copy=False).tobytes(order="C"))
    meta = {"ids": list(ds.ids), "method": ds.method, "manifest": ds.manifest}
    with open(sidecar or sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")


def read_values(path):
    """Read the raw ``(count, dim)`` float32 matrix from a descriptor file."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise DescriptorError(f"{path}: truncated header")
    magic, version, count, dim = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DescriptorError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise DescriptorError(f"{path}: unsupported version {version}")
    if count and dim == 0:
        raise DescriptorError(f"{path}: zero descriptor dimension")
    expected = _HEADER.size + 4 * count * dim
    if len(data) < expected:
        raise DescriptorError(
            f"{path}: truncated file, header promises {count}x{dim} floats "
            f"but only {(len(data) - _HEADER.size) // 4} present"
        )
    if len(data) > expected:
        raise DescriptorError(f"{path}: {len(data) - expected} trailing bytes after {count}x{dim} floats")
    values = np.frombuffer(data, dtype="<f4", count=count * dim, offset=_HEADER.size)
    return values.reshape(count, dim).astype(np.float32)


def load(path, sidecar=None, manifest=None):
    """Read a descriptor file; align to ``manifest`` rows when given."""
    values = read_values(path)
    sidecar = Path(sidecar) if sidecar else sidecar_path(path)
    try:
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise DescriptorError(f"missing id sidecar {sidecar}") from exc
    ids = meta.get("ids")
    if not isinstance(ids, list):
        raise DescriptorError(f"{sidecar}: 'ids' must be a list")
    if len(ids) != values.shape[0]:
        raise DescriptorError(f"{sidecar}: {len(ids)} ids but {values.shape[0]} descriptor rows")
    method = meta.get("method", "imported")
    if method not in METHODS:
        method = "imported"
    ds = DescriptorSet(method, tuple(ids), values, meta.get("manifest", ""))
    return ds.align(manifest) if manifest is not None else ds
