"""Dominant orientation and 128-d gradient descriptors on the gray image.

Keypoints are detected on the entropy field but described here on a gray
pyramid built with identical octave geometry, so (x, y, sigma) transfer
verbatim.  One dominant orientation is kept per keypoint.
"""

from __future__ import annotations

import logging
from dataclasses import replace

import numpy as np
from numba import njit

from .entropy import round_half_up
from .scale_space import Keypoint, Pyramid

logger = logging.getLogger(__name__)

ORI_BINS = 36
ORI_RADIUS_FACTOR = 4.5     # window radius = 4.5 * sigma
ORI_SIGMA_FACTOR = 1.5      # Gaussian weight std = 1.5 * sigma
DESC_WIDTH = 4              # spatial grid
DESC_BINS = 8               # orientation bins per cell
DESC_CELL_FACTOR = 3.0      # cell side = 3 * sigma
DESC_CLAMP = 0.2


def locate_level(pyr: Pyramid, kp: Keypoint) -> tuple[int, int]:
    """Pyramid (octave, level) whose absolute scale is nearest kp.sigma."""
    s = pyr.scales_per_octave
    max_level = s + 2
    if kp.octave >= 0:
        o = min(kp.octave, pyr.num_octaves - 1)
    else:
        total = round_half_up(s * np.log2(max(kp.sigma, 1e-12) / pyr.sigma0))
        total = max(0, total)
        o = max(0, int(np.ceil((total - max_level) / s)))
        o = min(o, pyr.num_octaves - 1)
    rel = s * np.log2(max(kp.sigma, 1e-12) / (pyr.sigma0 * 2.0**o))
    level = int(np.clip(round_half_up(rel), 0, max_level))
    return o, level


@njit(cache=True)
def _orientation_histogram(img, x, y, sigma_rel):  # pragma: no cover - numba
    h, w = img.shape
    hist = np.zeros(ORI_BINS, dtype=np.float64)
    radius = int(np.floor(ORI_RADIUS_FACTOR * sigma_rel + 0.5))
    if radius < 1:
        radius = 1
    denom = 2.0 * (ORI_SIGMA_FACTOR * sigma_rel) ** 2
    cy = int(np.floor(y + 0.5))
    cx = int(np.floor(x + 0.5))
    r2 = radius * radius
    for dy in range(-radius, radius + 1):
        yy = cy + dy
        if yy < 1 or yy > h - 2:
            continue
        for dx in range(-radius, radius + 1):
            if dx * dx + dy * dy > r2:
                continue
            xx = cx + dx
            if xx < 1 or xx > w - 2:
                continue
            gx = img[yy, xx + 1] - img[yy, xx - 1]
            gy = img[yy + 1, xx] - img[yy - 1, xx]
            mag = np.sqrt(gx * gx + gy * gy)
            if mag == 0.0:
                continue
            ang = np.degrees(np.arctan2(gy, gx)) % 360.0
            weight = np.exp(-(dx * dx + dy * dy) / denom)
            b = int(np.floor(ang * ORI_BINS / 360.0 + 0.5)) % ORI_BINS
            hist[b] += weight * mag
    return hist


def _histogram_peak_angle(hist: np.ndarray) -> float:
    peak = int(np.argmax(hist))
    if hist[peak] <= 0.0:
        return 0.0
    left = hist[(peak - 1) % ORI_BINS]
    right = hist[(peak + 1) % ORI_BINS]
    denom = left - 2.0 * hist[peak] + right
    offset = 0.5 * (left - right) / denom if denom != 0.0 else 0.0
    return float(((peak + offset) * (360.0 / ORI_BINS)) % 360.0)


def compute_orientation(gray_pyr: Pyramid, kp: Keypoint) -> float:
    """Parabola-interpolated peak of the 36-bin gradient histogram, degrees."""
    o, level = locate_level(gray_pyr, kp)
    img = gray_pyr.octaves[o][level]
    scale = 2.0**o
    hist = _orientation_histogram(img, kp.x / scale, kp.y / scale, kp.sigma / scale)
    return _histogram_peak_angle(hist)


@njit(cache=True)
def _descriptor_histogram(img, x, y, sigma_rel, theta):  # pragma: no cover - numba
    h, w = img.shape
    hist = np.zeros((DESC_WIDTH + 2, DESC_WIDTH + 2, DESC_BINS), dtype=np.float64)
    cell = DESC_CELL_FACTOR * sigma_rel
    half = int(np.floor(cell * np.sqrt(2.0) * (DESC_WIDTH + 1) * 0.5 + 0.5))
    diag = int(np.sqrt(h * h + w * w))
    if half > diag:
        half = diag
    cos_a = np.cos(np.radians(-theta))
    sin_a = np.sin(np.radians(-theta))
    bins_per_deg = DESC_BINS / 360.0
    weight_denom = 0.5 * DESC_WIDTH * DESC_WIDTH
    cy = int(np.floor(y + 0.5))
    cx = int(np.floor(x + 0.5))
    for r in range(-half, half + 1):
        yy = cy + r
        if yy < 1 or yy > h - 2:
            continue
        for c in range(-half, half + 1):
            xx = cx + c
            if xx < 1 or xx > w - 2:
                continue
            r_rot = (c * sin_a + r * cos_a) / cell
            c_rot = (c * cos_a - r * sin_a) / cell
            rbin = r_rot + 0.5 * DESC_WIDTH - 0.5
            cbin = c_rot + 0.5 * DESC_WIDTH - 0.5
            if rbin <= -1.0 or rbin >= DESC_WIDTH or cbin <= -1.0 or cbin >= DESC_WIDTH:
                continue
            gx = img[yy, xx + 1] - img[yy, xx - 1]
            gy = img[yy + 1, xx] - img[yy - 1, xx]
            mag = np.sqrt(gx * gx + gy * gy)
            if mag == 0.0:
                continue
            ang = np.degrees(np.arctan2(gy, gx)) % 360.0
            obin = ((ang - theta) % 360.0) * bins_per_deg
            weight = np.exp(-(r_rot * r_rot + c_rot * c_rot) / weight_denom)
            val = weight * mag

            r0 = int(np.floor(rbin))
            c0 = int(np.floor(cbin))
            o0 = int(np.floor(obin))
            rf = rbin - r0
            cf = cbin - c0
            of = obin - o0
            o0 = o0 % DESC_BINS
            o1 = (o0 + 1) % DESC_BINS
            for dr in range(2):
                wr = val * (rf if dr else 1.0 - rf)
                for dc in range(2):
                    wc = wr * (cf if dc else 1.0 - cf)
                    hist[r0 + 1 + dr, c0 + 1 + dc, o0] += wc * (1.0 - of)
                    hist[r0 + 1 + dr, c0 + 1 + dc, o1] += wc * of
    return hist[1 : DESC_WIDTH + 1, 1 : DESC_WIDTH + 1, :].copy().reshape(
        DESC_WIDTH * DESC_WIDTH * DESC_BINS
    )


def _unit_clamped(raw: np.ndarray) -> np.ndarray | None:
    """Scale so the vector has unit norm with every component <= DESC_CLAMP.

    Solves the clamp-then-renormalize fixed point by bisection on the
    pre-clamp gain; returns None for an all-zero gradient window.
    """
    norm = np.linalg.norm(raw)
    if norm < 1e-12:
        return None
    u = raw / norm
    if u.max() <= DESC_CLAMP:
        return u
    lo, hi = 1.0, 2.0
    while np.linalg.norm(np.minimum(DESC_CLAMP, hi * u)) < 1.0:
        hi *= 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if np.linalg.norm(np.minimum(DESC_CLAMP, mid * u)) < 1.0:
            lo = mid
        else:
            hi = mid
    return np.minimum(DESC_CLAMP, hi * u)


def compute_descriptor(gray_pyr: Pyramid, kp: Keypoint) -> np.ndarray:
    """128-d descriptor; the zero vector flags a degenerate (flat) window."""
    if kp.theta is None:
        raise ValueError("keypoint orientation must be computed before the descriptor")
    o, level = locate_level(gray_pyr, kp)
    img = gray_pyr.octaves[o][level]
    scale = 2.0**o
    raw = _descriptor_histogram(img, kp.x / scale, kp.y / scale, kp.sigma / scale, kp.theta)
    vec = _unit_clamped(raw)
    if vec is None:
        return np.zeros(DESC_WIDTH * DESC_WIDTH * DESC_BINS)
    return vec


def describe_keypoints(
    gray_pyr: Pyramid, kps: list[Keypoint]
) -> tuple[list[Keypoint], np.ndarray, np.ndarray]:
    """Assign orientations and extract descriptors for every keypoint.

    Returns the oriented keypoints, an (N, 128) descriptor array, and a
    boolean usability flag per keypoint (False = degenerate descriptor).
    """
    oriented = [replace(kp, theta=compute_orientation(gray_pyr, kp)) for kp in kps]
    n = len(oriented)
    descriptors = np.zeros((n, DESC_WIDTH * DESC_WIDTH * DESC_BINS))
    usable = np.zeros(n, dtype=bool)
    for i, kp in enumerate(oriented):
        vec = compute_descriptor(gray_pyr, kp)
        descriptors[i] = vec
        usable[i] = bool(np.any(vec))
    return oriented, descriptors, usable


def attach_values(
    kps: list[Keypoint], gray: np.ndarray, emap: np.ndarray
) -> tuple[list[Keypoint], int]:
    """Sample gray and entropy values at each keypoint's nearest pixel.

    Out-of-bounds keypoints are dropped; the count of drops is returned and
    logged as a warning.
    """
    h, w = gray.shape
    kept: list[Keypoint] = []
    dropped = 0
    for kp in kps:
        px = round_half_up(kp.x)
        py = round_half_up(kp.y)
        if not (0 <= px < w and 0 <= py < h):
            dropped += 1
            continue
        kept.append(
            replace(kp, gray_value=int(gray[py, px]), entropy_value=float(emap[py, px]))
        )
    if dropped:
        logger.warning("dropped %d out-of-bounds keypoints", dropped)
    return kept, dropped
