"""Image decoding, grayscale conversion, bicubic resampling, mask I/O.

Images are plain numpy arrays: RGB is ``(H, W, 3) uint8``, grayscale is
``(H, W) uint8``, masks are ``(H, W) bool``.  All functions are pure; arrays
are never modified in place.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, UnidentifiedImageError

# ITU-R BT.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])

# Catmull-Rom parameter
_CUBIC_A = -0.5


def load_image(path: str | Path) -> np.ndarray:
    """Decode a PNG/JPEG/BMP file into an (H, W, 3) uint8 array.

    Alpha channels are dropped; palette and grayscale files are expanded
    to three channels.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"image file not found: {path}")
    try:
        with Image.open(path) as im:
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError) as err:
        raise ValueError(f"cannot decode image {path}: {err}") from err
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"cannot decode image {path}: empty or malformed data")
    return arr


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """BT.601 luma: round(0.299 R + 0.587 G + 0.114 B), half-up."""
    if img.ndim == 2:
        return img.astype(np.uint8)
    luma = img.astype(np.float64) @ _LUMA
    return np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)


def _cubic_kernel(x: np.ndarray) -> np.ndarray:
    x = np.abs(x)
    a = _CUBIC_A
    out = np.zeros_like(x)
    near = x <= 1.0
    mid = (x > 1.0) & (x < 2.0)
    xn = x[near]
    out[near] = (a + 2.0) * xn**3 - (a + 3.0) * xn**2 + 1.0
    xm = x[mid]
    out[mid] = a * (xm**3 - 5.0 * xm**2 + 8.0 * xm - 4.0)
    return out


def _resample_axis0(arr: np.ndarray, out_len: int, scale: float) -> np.ndarray:
    """Separable bicubic pass along axis 0 with edge replication."""
    n = arr.shape[0]
    pos = (np.arange(out_len) + 0.5) / scale - 0.5
    base = np.floor(pos).astype(np.int64)
    frac = pos - base
    acc = np.zeros((out_len,) + arr.shape[1:], dtype=np.float64)
    for tap in range(4):
        idx = np.clip(base - 1 + tap, 0, n - 1)
        w = _cubic_kernel(frac + 1.0 - tap)
        acc += w.reshape((-1,) + (1,) * (arr.ndim - 1)) * arr[idx]
    return acc


def resize_bicubic(img: np.ndarray, s: float) -> np.ndarray:
    """Resize a grayscale image by factor ``s`` with Catmull-Rom interpolation.

    Output dimensions are round-half-up of ``s`` times the input dimensions;
    ``s=1`` returns a pixel-identical copy.
    """
    if s <= 0:
        raise ValueError(f"resize factor must be positive, got {s}")
    h, w = img.shape[:2]
    out_h = int(np.floor(s * h + 0.5))
    out_w = int(np.floor(s * w + 0.5))
    if out_h < 1 or out_w < 1:
        raise ValueError(f"resize of {w}x{h} by {s} would produce an empty image")
    work = img.astype(np.float64)
    work = _resample_axis0(work, out_h, s)
    work = _resample_axis0(work.swapaxes(0, 1), out_w, s).swapaxes(0, 1)
    return np.clip(np.floor(work + 0.5), 0, 255).astype(np.uint8)


def resize_nearest_mask(mask: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbor resample of a boolean mask to ``(height, width)``."""
    h, w = mask.shape
    out_h, out_w = out_shape
    ys = np.clip(np.floor((np.arange(out_h) + 0.5) * h / out_h), 0, h - 1).astype(np.int64)
    xs = np.clip(np.floor((np.arange(out_w) + 0.5) * w / out_w), 0, w - 1).astype(np.int64)
    return mask[np.ix_(ys, xs)]


def save_gray_png(img: np.ndarray, path: str | Path) -> None:
    Image.fromarray(img.astype(np.uint8), mode="L").save(Path(path), format="PNG")


def save_rgb_png(img: np.ndarray, path: str | Path) -> None:
    Image.fromarray(img.astype(np.uint8), mode="RGB").save(Path(path), format="PNG")


def save_u16_png(values: np.ndarray, path: str | Path) -> None:
    """Write a 16-bit grayscale PNG (values already in [0, 65535])."""
    arr = values.astype(np.uint16)
    im = Image.new("I;16", (arr.shape[1], arr.shape[0]))
    im.frombytes(arr.tobytes())
    im.save(Path(path), format="PNG")


def save_mask(mask: np.ndarray, path: str | Path) -> None:
    """Write a binary mask as an 8-bit PNG holding exactly 0 and 255."""
    save_gray_png(np.where(mask, 255, 0).astype(np.uint8), path)


def load_mask(path: str | Path, threshold: int = 128) -> np.ndarray:
    """Read a mask image; pixels >= threshold count as tampered."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"mask file not found: {path}")
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"))
    except (UnidentifiedImageError, OSError, SyntaxError) as err:
        raise ValueError(f"cannot decode mask {path}: {err}") from err
    return arr >= threshold


def write_overlay(
    gray: np.ndarray,
    match_endpoints: list[tuple[float, float, float, float]],
    mask: np.ndarray | None,
    path: str | Path,
) -> None:
    """Render match lines and the mask contour over the image as 24-bit PNG.

    ``match_endpoints`` holds (x1, y1, x2, y2) in the image's own coordinates;
    ``mask`` must have the same shape as ``gray`` when given.
    """
    rgb = np.repeat(gray[:, :, None], 3, axis=2).astype(np.uint8)
    if mask is not None and mask.any():
        interior = _erode_once(mask)
        contour = mask & ~interior
        rgb[contour] = (255, 0, 0)
    im = Image.fromarray(rgb, mode="RGB")
    draw = ImageDraw.Draw(im)
    for x1, y1, x2, y2 in match_endpoints:
        draw.line([(x1, y1), (x2, y2)], fill=(0, 255, 0), width=1)
        draw.point([(x1, y1), (x2, y2)], fill=(255, 255, 0))
    im.save(Path(path), format="PNG")


def _erode_once(mask: np.ndarray) -> np.ndarray:
    padded = np.pad(mask, 1, mode="constant")
    out = padded[1:-1, 1:-1].copy()
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            out &= padded[1 + dy : padded.shape[0] - 1 + dy, 1 + dx : padded.shape[1] - 1 + dx]
    return out
