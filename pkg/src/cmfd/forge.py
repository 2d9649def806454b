"""Synthetic copy-move forgery generator.

Copies a rectangle out of an image, optionally rotates and scales it about
its center, pastes it at a translated position, and emits the ground-truth
mask covering both the source and the pasted region.  Also provides
procedural textured backgrounds so tests and studies can run without any
external dataset.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter


def forge_copy_move(
    image: np.ndarray,
    src_rect: tuple[int, int, int, int],
    translate: tuple[float, float] = (0.0, 0.0),
    rotate: float = 0.0,
    scale: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Clone ``src_rect`` = (x, y, w, h) under translation/rotation/scale.

    Returns (tampered image, boolean mask of source plus destination).
    Raises ValueError when the rectangle or its transformed footprint leaves
    the image, or when the destination overlaps the source.
    """
    arr = np.asarray(image)
    h, w = arr.shape[:2]
    x0, y0, rw, rh = (int(v) for v in src_rect)
    if rw < 1 or rh < 1 or x0 < 0 or y0 < 0 or x0 + rw > w or y0 + rh > h:
        raise ValueError(f"source rectangle {src_rect} outside {w}x{h} image")
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")

    c_src = np.array([x0 + rw / 2.0, y0 + rh / 2.0])
    c_dst = c_src + np.asarray(translate, dtype=np.float64)
    ang = np.radians(rotate)
    fwd = scale * np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
    inv = np.linalg.inv(fwd)

    # region of pixel centers covered by the source rectangle
    lo = np.array([x0 - 0.5, y0 - 0.5])
    hi = np.array([x0 + rw - 0.5, y0 + rh - 0.5])
    corners = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    moved = (corners - c_src) @ fwd.T + c_dst
    if (moved[:, 0] < -0.5).any() or (moved[:, 0] > w - 0.5).any() \
            or (moved[:, 1] < -0.5).any() or (moved[:, 1] > h - 0.5).any():
        raise ValueError("transformed destination leaves the image bounds")

    bx0 = max(0, int(np.floor(moved[:, 0].min())))
    bx1 = min(w - 1, int(np.ceil(moved[:, 0].max())))
    by0 = max(0, int(np.floor(moved[:, 1].min())))
    by1 = min(h - 1, int(np.ceil(moved[:, 1].max())))
    gx, gy = np.meshgrid(np.arange(bx0, bx1 + 1), np.arange(by0, by1 + 1))
    pts = np.column_stack([gx.ravel(), gy.ravel()]).astype(np.float64)
    back = (pts - c_dst) @ inv.T + c_src
    inside = (
        (back[:, 0] >= lo[0]) & (back[:, 0] < hi[0])
        & (back[:, 1] >= lo[1]) & (back[:, 1] < hi[1])
    )

    dst_mask = np.zeros((h, w), dtype=bool)
    dst_mask[pts[inside, 1].astype(int), pts[inside, 0].astype(int)] = True
    src_mask = np.zeros((h, w), dtype=bool)
    src_mask[y0 : y0 + rh, x0 : x0 + rw] = True
    if (dst_mask & src_mask).any():
        raise ValueError("destination region overlaps the source rectangle")

    out = arr.copy()
    sample_pts = back[inside]
    ys = pts[inside, 1].astype(int)
    xs = pts[inside, 0].astype(int)
    if arr.ndim == 2:
        out[ys, xs] = _bilinear_u8(arr, sample_pts)
    else:
        for ch in range(arr.shape[2]):
            out[ys, xs, ch] = _bilinear_u8(arr[:, :, ch], sample_pts)
    return out, src_mask | dst_mask


def _bilinear_u8(img: np.ndarray, pts: np.ndarray) -> np.ndarray:
    h, w = img.shape
    xs = np.clip(pts[:, 0], 0.0, w - 1.000001)
    ys = np.clip(pts[:, 1], 0.0, h - 1.000001)
    x0 = xs.astype(np.int64)
    y0 = ys.astype(np.int64)
    fx = xs - x0
    fy = ys - y0
    imgf = img.astype(np.float64)
    top = imgf[y0, x0] * (1 - fx) + imgf[y0, x0 + 1] * fx
    bot = imgf[y0 + 1, x0] * (1 - fx) + imgf[y0 + 1, x0 + 1] * fx
    val = top * (1 - fy) + bot * fy
    return np.clip(np.floor(val + 0.5), 0, 255).astype(np.uint8)


def synthetic_background(
    shape: tuple[int, int], seed: int, detail: float = 1.0
) -> np.ndarray:
    """Cloud-like texture with both smooth expanses and fine structure.

    ``detail`` scales the fine-grain component; lower values make smoother
    images with fewer detectable keypoints.
    """
    rng = np.random.default_rng(seed)
    coarse = gaussian_filter(rng.uniform(size=shape), 18.0, mode="reflect")
    medium = gaussian_filter(rng.uniform(size=shape), 6.0, mode="reflect")
    fine = gaussian_filter(rng.uniform(size=shape), 2.0, mode="reflect")
    acc = 1.0 * _stretch(coarse) + 0.45 * _stretch(medium) + 0.18 * detail * _stretch(fine)
    return np.clip(np.floor(_stretch(acc) * 235 + 10 + 0.5), 0, 255).astype(np.uint8)


def _stretch(a: np.ndarray) -> np.ndarray:
    lo, hi = a.min(), a.max()
    if hi - lo < 1e-12:
        return np.zeros_like(a)
    return (a - lo) / (hi - lo)


DEFAULT_CASES = (
    {"translate": (0.45, 0.05), "rotate": 0.0, "scale": 1.0},
    {"translate": (0.40, 0.30), "rotate": 0.0, "scale": 1.0},
    {"translate": (0.05, 0.42), "rotate": 0.0, "scale": 1.0},
    {"translate": (0.35, 0.35), "rotate": 10.0, "scale": 1.0},
    {"translate": (0.42, 0.12), "rotate": 30.0, "scale": 1.0},
    {"translate": (0.10, 0.40), "rotate": 90.0, "scale": 1.0},
    {"translate": (0.40, 0.22), "rotate": 0.0, "scale": 0.8},
    {"translate": (0.30, 0.38), "rotate": 0.0, "scale": 1.25},
    {"translate": (0.44, 0.18), "rotate": 30.0, "scale": 0.8},
    {"translate": (0.18, 0.42), "rotate": 10.0, "scale": 1.25},
)


def synthetic_forgery(
    size: int = 384,
    seed: int = 0,
    translate: tuple[float, float] | None = None,
    rotate: float = 0.0,
    scale: float = 1.0,
    patch_frac: float = 0.22,
    detail: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """One self-contained forged image plus its ground-truth mask.

    ``translate`` is in units of the image side; default moves the patch
    right and down by a third of the image.
    """
    base = synthetic_background((size, size), seed=seed, detail=detail)
    patch = int(size * patch_frac)
    x0 = int(size * 0.18)
    y0 = int(size * 0.18)
    if translate is None:
        translate = (0.34, 0.34)
    tx = translate[0] * size
    ty = translate[1] * size
    return forge_copy_move(base, (x0, y0, patch, patch), (tx, ty), rotate, scale)


def synthetic_corpus(
    n: int = 10, size: int = 384, seed0: int = 100, detail: float = 1.0
) -> list[dict]:
    """Deterministic forged test corpus; entry i uses DEFAULT_CASES[i % 10]."""
    out = []
    for i in range(n):
        case = DEFAULT_CASES[i % len(DEFAULT_CASES)]
        image, mask = synthetic_forgery(
            size=size,
            seed=seed0 + i,
            translate=case["translate"],
            rotate=case["rotate"],
            scale=case["scale"],
            detail=detail,
        )
        out.append({"image": image, "mask": mask, "params": dict(case), "seed": seed0 + i})
    return out
