"""Hierarchical overlapped clustering and g2NN descriptor matching.

Keypoints are first split into overlapping gray-value intervals, each of
those into overlapping entropy-value intervals, and matching runs
independently inside every second-level group.  Pairs found in several
overlapping groups are deduplicated.  A brute-force mode (one group holding
everything) serves as the reference the clustered mode is measured against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import Config
from .scale_space import Keypoint, keypoint_xy

GRAY_CEILING = 255
ENTROPY_CLUSTER_CEILING = 7.0

# distances below this (squared) collapse to zero so identical descriptors
# compare equal no matter which group computed them
_ZERO_SNAP_SQ = 1e-12

# sorted-prefix length tried before falling back to a full sort of a query row
_PARTIAL_RANKS = 32


@dataclass
class ClusterGroup:
    u: int                       # gray-level group index, 1-based
    v: int | None                # entropy-level index, None for level-1 groups
    gray_lo: float
    gray_hi: float               # [lo, hi), closed at 255
    entropy_lo: float | None
    entropy_hi: float | None     # closed interval
    indices: np.ndarray          # member keypoint indices, ascending


@dataclass(frozen=True)
class MatchPair:
    i: int
    j: int
    distance: float
    spatial_distance: float


def gray_group_count(step1: int, step2: int) -> int:
    if step1 <= step2:
        raise ValueError(f"need step1 > step2, got step1={step1}, step2={step2}")
    return math.ceil((GRAY_CEILING - step1) / (step1 - step2)) + 1


def entropy_group_count(step3: float, step4: float) -> int:
    if step3 <= 0:
        raise ValueError(f"step3 must be positive, got {step3}")
    return math.ceil((ENTROPY_CLUSTER_CEILING - step4) / step3)


def _gray_values(kps: list[Keypoint] | np.ndarray) -> np.ndarray:
    if isinstance(kps, np.ndarray):
        return kps
    return np.array([kp.gray_value for kp in kps], dtype=np.float64)


def _entropy_values(kps: list[Keypoint] | np.ndarray) -> np.ndarray:
    if isinstance(kps, np.ndarray):
        return kps
    return np.array([kp.entropy_value for kp in kps], dtype=np.float64)


def gray_level_groups(
    kps: list[Keypoint] | np.ndarray, step1: int, step2: int
) -> list[ClusterGroup]:
    """Level-1 groups over overlapping gray intervals."""
    values = _gray_values(kps)
    n_u = gray_group_count(step1, step2)
    groups = []
    for u in range(1, n_u + 1):
        lo = (u - 1) * (step1 - step2)
        hi = min(lo + step1, GRAY_CEILING)
        member = (values >= lo) & (values < hi)
        if hi == GRAY_CEILING:
            member |= values == GRAY_CEILING
        groups.append(
            ClusterGroup(
                u=u,
                v=None,
                gray_lo=float(lo),
                gray_hi=float(hi),
                entropy_lo=None,
                entropy_hi=None,
                indices=np.nonzero(member)[0],
            )
        )
    return groups


def entropy_level_subgroups(
    group: ClusterGroup,
    kps: list[Keypoint] | np.ndarray,
    step3: float,
    step4: float,
) -> list[ClusterGroup]:
    """Level-2 subgroups of one gray group over overlapping entropy intervals."""
    values = _entropy_values(kps)
    n_v = entropy_group_count(step3, step4)
    member_values = values[group.indices]
    out = []
    for v in range(1, n_v + 1):
        lo = max(0.0, (v - 1) * step3 - step4)
        hi = min(ENTROPY_CLUSTER_CEILING, v * step3 + step4)
        if v == n_v:
            # the last interval reaches the ceiling even under float rounding
            hi = ENTROPY_CLUSTER_CEILING
        member = (member_values >= lo) & (member_values <= hi)
        out.append(
            ClusterGroup(
                u=group.u,
                v=v,
                gray_lo=group.gray_lo,
                gray_hi=group.gray_hi,
                entropy_lo=lo,
                entropy_hi=hi,
                indices=group.indices[member],
            )
        )
    return out


def _squared_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    sq = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * (a @ b.T)
    np.maximum(sq, 0.0, out=sq)
    sq[sq < _ZERO_SNAP_SQ] = 0.0
    return sq


def _g2nn_accepted_ranks(sorted_d: np.ndarray, t_ratio: float, exhaustive: bool) -> list[int]:
    """Ranks accepted by the ratio scan; sorted_d[0] is the self distance."""
    accepted = []
    n = sorted_d.shape[0]
    for i in range(1, n - 1):
        if sorted_d[i] < t_ratio * sorted_d[i + 1]:
            accepted.append(i)
        elif not exhaustive:
            break
    return accepted


def match_group(
    group: ClusterGroup,
    descriptors: np.ndarray,
    xy: np.ndarray,
    t_ratio: float,
    min_spatial_distance: float = 0.0,
    exhaustive: bool = False,
) -> list[MatchPair]:
    """g2NN matching among one group's members.

    For every member, distances to all members are sorted ascending (self
    distance 0 first) and neighbors are accepted while d_i < t_ratio * d_{i+1}.
    Pairs closer than ``min_spatial_distance`` in the image are not emitted.
    """
    if not (0 < t_ratio < 1):
        raise ValueError(f"ratio threshold must be in (0, 1), got {t_ratio}")
    members = np.sort(np.asarray(group.indices))
    m = members.size
    if m < 3:
        return []
    desc = descriptors[members]
    pts = xy[members]
    pairs: dict[tuple[int, int], MatchPair] = {}
    chunk = max(1, min(m, 8_388_608 // max(m, 1) + 1))
    for start in range(0, m, chunk):
        stop = min(start + chunk, m)
        sq = _squared_distances(desc[start:stop], desc)
        rows = np.arange(start, stop)
        sq[np.arange(stop - start), rows] = -1.0  # pin self to rank 0
        d = np.sqrt(np.maximum(sq, 0.0))
        d[np.arange(stop - start), rows] = -1.0
        for local, row in enumerate(rows):
            _scan_query(
                d[local], members, pts, row, t_ratio, min_spatial_distance,
                exhaustive, pairs,
            )
    return sorted(pairs.values(), key=lambda p: (p.i, p.j))


def _scan_query(drow, members, pts, row, t_ratio, min_spatial, exhaustive, pairs):
    m = drow.shape[0]
    need = min(_PARTIAL_RANKS + 2, m)
    if need < m and not exhaustive:
        part = np.argpartition(drow, need - 1)[:need]
        # ties broken by member position, as in a stable full sort
        order = part[np.lexsort((part, drow[part]))]
        sorted_d = drow[order].copy()
        sorted_d[0] = 0.0  # self
        accepted = _g2nn_accepted_ranks(sorted_d, t_ratio, exhaustive)
        if accepted and accepted[-1] == need - 2:
            # the scan ran off the sorted prefix: redo with a full sort
            order = np.argsort(drow, kind="stable")
            sorted_d = drow[order].copy()
            sorted_d[0] = 0.0
            accepted = _g2nn_accepted_ranks(sorted_d, t_ratio, exhaustive)
    else:
        order = np.argsort(drow, kind="stable")
        sorted_d = drow[order].copy()
        sorted_d[0] = 0.0
        accepted = _g2nn_accepted_ranks(sorted_d, t_ratio, exhaustive)
    qi = int(members[row])
    for rank in accepted:
        col = order[rank]
        nj = int(members[col])
        spatial = float(np.hypot(*(pts[row] - pts[col])))
        if spatial < min_spatial:
            continue
        key = (qi, nj) if qi < nj else (nj, qi)
        dist = float(sorted_d[rank])
        prev = pairs.get(key)
        if prev is None or dist < prev.distance:
            pairs[key] = MatchPair(i=key[0], j=key[1], distance=dist, spatial_distance=spatial)


def match_all(
    kps: list[Keypoint],
    descriptors: np.ndarray,
    usable: np.ndarray,
    config: Config,
    mode: str = "two-level",
) -> tuple[list[MatchPair], dict]:
    """Union of per-group matches, deduplicated and index-normalized.

    ``mode`` selects "two-level" (gray then entropy clustering), "gray"
    (gray clustering only), or "brute" (a single all-keypoint group, the
    oracle the clustered modes are measured against).  The stats dict
    reports the group count and the number of unique descriptor-distance
    computations implied by the group sizes.
    """
    if mode not in ("two-level", "gray", "brute"):
        raise ValueError(f"unknown matching mode {mode!r}")
    eligible = np.nonzero(usable)[0]
    xy = keypoint_xy(kps)
    if mode == "brute":
        groups = [
            ClusterGroup(
                u=1, v=None, gray_lo=0.0, gray_hi=GRAY_CEILING,
                entropy_lo=0.0, entropy_hi=ENTROPY_CLUSTER_CEILING, indices=eligible,
            )
        ]
    else:
        gray_vals = _gray_values(kps)
        masked = np.full_like(gray_vals, -1.0)
        masked[eligible] = gray_vals[eligible]
        groups = gray_level_groups(masked, config.step1, config.step2)
        if mode == "two-level":
            entropy_vals = _entropy_values(kps)
            groups = [
                sub
                for g in groups
                for sub in entropy_level_subgroups(g, entropy_vals, config.step3, config.step4)
            ]
    pairs: dict[tuple[int, int], MatchPair] = {}
    comparisons = 0
    for group in groups:
        m = group.indices.size
        comparisons += m * (m - 1) // 2
        for match in match_group(
            group, descriptors, xy, config.t_ratio,
            config.min_spatial_distance, config.exhaustive_scan,
        ):
            key = (match.i, match.j)
            prev = pairs.get(key)
            if prev is None or match.distance < prev.distance:
                pairs[key] = match
    stats = {"groups": len(groups), "comparisons": comparisons}
    return sorted(pairs.values(), key=lambda p: (p.i, p.j)), stats
