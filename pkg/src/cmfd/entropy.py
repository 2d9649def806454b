"""Local Shannon entropy image.

Each output pixel holds the entropy, in bits, of the 256-bin gray-level
histogram of the (2*radius+1)^2 window centered on it.  Windows that stick
out of the image are clipped and the probabilities renormalized over the
pixels actually present, so corners carry meaningful values without invented
padding.

The map is computed with a sliding histogram: each step along a row moves one
window column out and one in, and the sum of c*log2(c) terms is patched
incrementally, making the full-map cost O(height * width * radius).
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Refresh the incremental c*log2(c) accumulator every this many columns to
# stop float drift from crossing the 1e-9 bit equivalence budget.
_RESYNC_COLUMNS = 128


def entropy_ceiling(radius: int) -> float:
    """Largest entropy a full (2*radius+1)^2 window can attain."""
    return 2.0 * np.log2(2 * radius + 1)


@njit(cache=True)
def _entropy_map_kernel(img, radius, resync, out):  # pragma: no cover - numba
    h, w = img.shape
    window = 2 * radius + 1
    nmax = window * window
    table = np.empty(nmax + 1, dtype=np.float64)
    table[0] = 0.0
    for c in range(1, nmax + 1):
        table[c] = c * np.log2(c)
    hist = np.zeros(256, dtype=np.int64)
    for y in range(h):
        y0 = y - radius
        if y0 < 0:
            y0 = 0
        y1 = y + radius
        if y1 > h - 1:
            y1 = h - 1
        hist[:] = 0
        n = 0
        clogc = 0.0
        x1 = radius if radius <= w - 1 else w - 1
        for yy in range(y0, y1 + 1):
            for xx in range(0, x1 + 1):
                v = img[yy, xx]
                clogc += table[hist[v] + 1] - table[hist[v]]
                hist[v] += 1
                n += 1
        out[y, 0] = np.log2(n) - clogc / n
        for x in range(1, w):
            x_out = x - radius - 1
            if x_out >= 0:
                for yy in range(y0, y1 + 1):
                    v = img[yy, x_out]
                    clogc += table[hist[v] - 1] - table[hist[v]]
                    hist[v] -= 1
                    n -= 1
            x_in = x + radius
            if x_in <= w - 1:
                for yy in range(y0, y1 + 1):
                    v = img[yy, x_in]
                    clogc += table[hist[v] + 1] - table[hist[v]]
                    hist[v] += 1
                    n += 1
            if x % resync == 0:
                clogc = 0.0
                for b in range(256):
                    clogc += table[hist[b]]
            out[y, x] = np.log2(n) - clogc / n


def compute_entropy_map(img: np.ndarray, radius: int) -> np.ndarray:
    """Per-pixel local entropy of an (H, W) uint8 image, in bits."""
    if radius < 1:
        raise ValueError(f"entropy radius must be >= 1, got {radius}")
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D gray image, got shape {img.shape}")
    img = np.ascontiguousarray(img, dtype=np.uint8)
    out = np.empty(img.shape, dtype=np.float64)
    _entropy_map_kernel(img, radius, _RESYNC_COLUMNS, out)
    # -0.0 from single-symbol windows; keep the map non-negative
    return np.abs(out)


def round_half_up(value: float) -> int:
    return int(np.floor(value + 0.5))


def sample_entropy(emap: np.ndarray, x: float, y: float) -> float:
    """Entropy at the nearest pixel (round-half-up) to a real coordinate."""
    px = round_half_up(x)
    py = round_half_up(y)
    h, w = emap.shape
    if not (0 <= px < w and 0 <= py < h):
        raise ValueError(f"coordinate ({x}, {y}) outside {w}x{h} entropy map")
    return float(emap[py, px])
