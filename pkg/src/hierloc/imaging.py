"""Panorama primitives.

A panorama is an ``(H, W, 3)`` uint8 numpy array whose columns cover 360
degrees, so column arithmetic is taken modulo ``W``. Intermediate math runs in
float64 and is written back with round-half-to-even.
"""

from pathlib import Path

import numpy as np
from PIL import Image


def check_panorama(p):
    """Validate and return ``p`` as a C-contiguous ``(H, W, 3)`` uint8 array."""
    p = np.asarray(p)
    if p.ndim != 3 or p.shape[2] != 3:
        raise ValueError(f"panorama must have shape (H, W, 3), got {p.shape}")
    if p.shape[0] < 1 or p.shape[1] < 1:
        raise ValueError(f"panorama must be at least 1x1, got {p.shape[1]}x{p.shape[0]}")
    if p.dtype != np.uint8:
        raise TypeError(f"panorama must be uint8, got {p.dtype}")
    return np.ascontiguousarray(p)


def to_u8(values):
    """Round half-to-even and saturate float values into uint8."""
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


def load(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def save(p, path):
    """Write ``p`` as a lossless PNG."""
    p = check_panorama(p)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(p, mode="RGB").save(path, format="PNG", optimize=False)


def clamp_add(value, delta):
    """Saturating add for 8-bit channels; works on scalars and arrays."""
    out = np.clip(np.asarray(value, dtype=np.int64) + np.asarray(delta, dtype=np.int64), 0, 255)
    if np.ndim(out) == 0:
        return int(out)
    return out.astype(np.uint8)


def resize(p, w, h):
    """Bilinear resize, cyclic across the left/right seam.

    Output column ``j`` samples the source at ``x = j * W / w`` (and likewise
    for rows), so resizing to the same size is the identity. Rows clamp at the
    top and bottom borders; columns wrap.
    """
    p = check_panorama(p)
    if w < 1 or h < 1:
        raise ValueError(f"target size must be at least 1x1, got {w}x{h}")
    H, W = p.shape[:2]
    if (w, h) == (W, H):
        return p.copy()

    src = p.astype(np.float64)

    xs = np.arange(w, dtype=np.float64) * W / w
    x0 = np.floor(xs).astype(np.int64)
    fx = (xs - x0)[None, :, None]
    x1 = (x0 + 1) % W
    x0 %= W

    ys = np.arange(h, dtype=np.float64) * H / h
    y0 = np.minimum(np.floor(ys).astype(np.int64), H - 1)
    fy = (ys - y0)[:, None, None]
    y1 = np.minimum(y0 + 1, H - 1)

    top = src[y0][:, x0] * (1.0 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1.0 - fx) + src[y1][:, x1] * fx
    return to_u8(top * (1.0 - fy) + bottom * fy)


def circular_shift(p, columns):
    """Rotate the panorama by ``columns`` (positive moves content right)."""
    p = check_panorama(p)
    return np.roll(p, int(columns) % p.shape[1], axis=1)


def rgb_to_hsv(rgb):
    """Hexcone HSV. Accepts ``(..., 3)`` uint8 or a single triple.

    Returns float arrays ``(h, s, v)`` with hue in degrees ``[0, 360)`` and
    saturation/value in ``[0, 1]``. Gray pixels get hue 0.
    """
    rgb = np.asarray(rgb, dtype=np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = np.max(rgb, axis=-1)
    c = v - np.min(rgb, axis=-1)
    safe_c = np.where(c > 0, c, 1.0)
    s = np.where(v > 0, c / np.where(v > 0, v, 1.0), 0.0)

    h = np.where(
        v == r,
        np.mod((g - b) / safe_c, 6.0),
        np.where(v == g, (b - r) / safe_c + 2.0, (r - g) / safe_c + 4.0),
    )
    h = np.where(c > 0, h * 60.0, 0.0)
    h = np.mod(h, 360.0)
    return h, s, v


def hsv_to_rgb(h, s, v):
    """Inverse of :func:`rgb_to_hsv`; returns uint8 with shape ``(..., 3)``."""
    h = np.mod(np.asarray(h, dtype=np.float64), 360.0) / 60.0
    s = np.asarray(s, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    c = v * s
    x = c * (1.0 - np.abs(np.mod(h, 2.0) - 1.0))
    m = v - c
    sector = np.floor(h).astype(np.int64) % 6
    zero = np.zeros_like(c)
    # (r, g, b) before adding m, per hue sector
    table = [
        (c, x, zero),
        (x, c, zero),
        (zero, c, x),
        (zero, x, c),
        (x, zero, c),
        (c, zero, x),
    ]
    r = np.choose(sector, [t[0] for t in table])
    g = np.choose(sector, [t[1] for t in table])
    b = np.choose(sector, [t[2] for t in table])
    return to_u8(np.stack([r + m, g + m, b + m], axis=-1) * 255.0)
