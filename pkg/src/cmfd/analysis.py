"""Diagnostic studies: keypoint-density ratios, entropy-difference CDF,
clustered-vs-brute-force recall sweeps, and contrast maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import Config
from .matcher import MatchPair, match_all
from .scale_space import Keypoint

ASSUMPTION_BLOCK = 16
ASSUMPTION_MIN_KEYPOINTS = 4


def assumption_ratio(
    kps: list[Keypoint], shape: tuple[int, int], block: int = ASSUMPTION_BLOCK
) -> float:
    """Fraction of non-overlapping block x block tiles holding >= 4 keypoints."""
    if block < 1:
        raise ValueError(f"block size must be >= 1, got {block}")
    h, w = shape
    ty, tx = h // block, w // block
    if ty == 0 or tx == 0:
        return 0.0
    counts = np.zeros((ty, tx), dtype=np.int64)
    for kp in kps:
        bx = int(kp.x // block)
        by = int(kp.y // block)
        if 0 <= bx < tx and 0 <= by < ty:
            counts[by, bx] += 1
    return float(np.count_nonzero(counts >= ASSUMPTION_MIN_KEYPOINTS) / counts.size)


@dataclass
class CdfTable:
    values: np.ndarray      # sorted ascending
    fractions: np.ndarray   # cumulative, ends at 1.0

    def at(self, x: float) -> float:
        """Fraction of observations <= x."""
        return float(np.searchsorted(self.values, x, side="right") / self.values.size)


def entropy_diff_cdf(matches: list[MatchPair], kps: list[Keypoint]) -> CdfTable:
    """Cumulative distribution of |entropy difference| over matched pairs."""
    if not matches:
        raise ValueError("cannot build a CDF from an empty match set")
    deltas = np.sort(
        np.array(
            [abs(kps[m.i].entropy_value - kps[m.j].entropy_value) for m in matches]
        )
    )
    fractions = np.arange(1, deltas.size + 1) / deltas.size
    return CdfTable(values=deltas, fractions=fractions)


def recall_vs_bruteforce(
    kps: list[Keypoint],
    descriptors: np.ndarray,
    usable: np.ndarray,
    config: Config,
    step4_values: np.ndarray | None = None,
    bruteforce: list[MatchPair] | None = None,
) -> list[tuple[float, float]]:
    """Clustered-match recall against the brute-force reference per step4.

    The sweep is checked for monotonicity before returning; a violation
    raises, since growing the overlap can only add shared groups.
    """
    if step4_values is None:
        step4_values = np.round(np.arange(0.0, 0.5 + 1e-9, 0.01), 4)
    if bruteforce is None:
        bruteforce, _ = match_all(kps, descriptors, usable, config, mode="brute")
    reference = {(m.i, m.j) for m in bruteforce}
    if not reference:
        raise ValueError("brute-force matching produced no pairs to compare against")
    table: list[tuple[float, float]] = []
    for step4 in step4_values:
        cfg = _with_step4(config, float(step4))
        clustered, _ = match_all(kps, descriptors, usable, cfg, mode="two-level")
        hits = sum(1 for m in clustered if (m.i, m.j) in reference)
        table.append((float(step4), hits / len(reference)))
    for (s_prev, r_prev), (s_next, r_next) in zip(table, table[1:]):
        if r_next < r_prev:
            raise RuntimeError(
                f"recall decreased from {r_prev:.4f} at step4={s_prev} "
                f"to {r_next:.4f} at step4={s_next}"
            )
    return table


def _with_step4(config: Config, step4: float) -> Config:
    from dataclasses import replace

    return replace(config, step4=step4)


def gradient_magnitude(field: np.ndarray) -> np.ndarray:
    gy, gx = np.gradient(field.astype(np.float64))
    return np.hypot(gx, gy)


def _normalize01(field: np.ndarray) -> np.ndarray:
    lo, hi = field.min(), field.max()
    if hi - lo < 1e-12:
        return np.zeros_like(field)
    return (field - lo) / (hi - lo)


def _jet_ramp(values: np.ndarray) -> np.ndarray:
    """Fixed blue->cyan->yellow->red ramp over [0, 1], uint8 RGB."""
    v = np.clip(values, 0.0, 1.0)
    r = np.clip(1.5 - np.abs(4.0 * v - 3.0), 0.0, 1.0)
    g = np.clip(1.5 - np.abs(4.0 * v - 2.0), 0.0, 1.0)
    b = np.clip(1.5 - np.abs(4.0 * v - 1.0), 0.0, 1.0)
    return (np.stack([r, g, b], axis=-1) * 255).astype(np.uint8)


def contrast_maps(
    gray: np.ndarray, entropy: np.ndarray, high_threshold: float = 0.5
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Pseudo-color gradient-magnitude maps of the gray and entropy fields.

    Returns RGB renderings plus the fraction of pixels whose normalized
    response exceeds ``high_threshold`` in each field.
    """
    gray_norm = _normalize01(gradient_magnitude(gray))
    entropy_norm = _normalize01(gradient_magnitude(entropy))
    stats = {
        "gray_high_fraction": float(np.mean(gray_norm > high_threshold)),
        "entropy_high_fraction": float(np.mean(entropy_norm > high_threshold)),
    }
    return _jet_ramp(gray_norm), _jet_ramp(entropy_norm), stats
