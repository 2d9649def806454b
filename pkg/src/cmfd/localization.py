"""Affine transform estimation and tamper-mask construction.

Matched pairs are oriented deterministically, fed through iterative RANSAC
(each accepted transform's inliers are removed and estimation repeats), and
each transform seeds a correlation-grown region: discs around the inlier
endpoints expand over pixels whose local patch stays correlated with its
image under the transform.  Morphology cleans the result, small components
are dropped, and the mask is brought back to the original resolution.

This stage uses only the coordinates of the matched keypoints, not their
orientations or scales.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import binary_closing, binary_dilation, binary_opening, label

from .config import Config
from .image_io import resize_nearest_mask
from .matcher import MatchPair
from .scale_space import Keypoint, keypoint_xy

DET_WINDOW = (0.25, 4.0)        # acceptable determinant range of the linear part
SEED_RADIUS = 8                 # px, discs around inlier endpoints
ZNCC_PATCH_RADIUS = 3           # 7x7 patches
ZNCC_THRESHOLD = 0.5
CLOSING_RADIUS = 4
OPENING_RADIUS = 2
MIN_CONSENSUS = 4


@dataclass
class AffineTransform:
    matrix: np.ndarray          # (2, 2)
    translation: np.ndarray     # (2,)

    def apply(self, pts: np.ndarray) -> np.ndarray:
        return pts @ self.matrix.T + self.translation

    def inverse(self) -> "AffineTransform":
        inv = np.linalg.inv(self.matrix)
        return AffineTransform(matrix=inv, translation=-inv @ self.translation)

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.matrix))

    def to_dict(self) -> dict:
        return {
            "matrix": self.matrix.tolist(),
            "translation": self.translation.tolist(),
            "determinant": self.determinant,
        }


@dataclass
class DetectionResult:
    mask: np.ndarray            # bool, original resolution
    transforms: list[AffineTransform]
    tampered: bool
    stats: dict = field(default_factory=dict)


def oriented_endpoints(
    matches: list[MatchPair], kps: list[Keypoint]
) -> tuple[np.ndarray, np.ndarray]:
    """Split pairs into (P, Q) point arrays with a deterministic orientation.

    Each pair is ordered so its lexicographically smaller endpoint (by x,
    then y) lands in P; matches of one clone then agree on direction, up to
    a T/T^-1 split that the duplicate merge resolves later.
    """
    xy = keypoint_xy(kps)
    p = np.empty((len(matches), 2))
    q = np.empty((len(matches), 2))
    for r, match in enumerate(matches):
        a, b = xy[match.i], xy[match.j]
        if (a[0], a[1]) <= (b[0], b[1]):
            p[r], q[r] = a, b
        else:
            p[r], q[r] = b, a
    return p, q


def _fit_affine_exact(p: np.ndarray, q: np.ndarray) -> AffineTransform | None:
    m = np.column_stack([p, np.ones(3)])
    if abs(np.linalg.det(m)) < 1e-8:
        return None
    coeff = np.linalg.solve(m, q)   # (3, 2): rows = [a1, a2], [b1, b2], [tx, ty]
    return AffineTransform(matrix=coeff[:2].T.copy(), translation=coeff[2].copy())


def _fit_affine_lsq(p: np.ndarray, q: np.ndarray) -> AffineTransform:
    m = np.column_stack([p, np.ones(len(p))])
    coeff, *_ = np.linalg.lstsq(m, q, rcond=None)
    return AffineTransform(matrix=coeff[:2].T.copy(), translation=coeff[2].copy())


def ransac_affine(
    matches: list[MatchPair],
    kps: list[Keypoint],
    iters: int,
    tol: float,
    rng: np.random.Generator,
) -> tuple[AffineTransform, np.ndarray] | None:
    """Best-consensus affine from 3-pair samples, refit by least squares.

    Returns (transform, inlier match indices) or None when fewer than
    MIN_CONSENSUS pairs ever agree.  Degenerate (collinear) samples are
    skipped and count against the iteration budget.
    """
    n = len(matches)
    if n < MIN_CONSENSUS:
        return None
    p, q = oriented_endpoints(matches, kps)
    best_count = 0
    best_inliers: np.ndarray | None = None
    for _ in range(iters):
        sample = rng.choice(n, size=3, replace=False)
        t = _fit_affine_exact(p[sample], q[sample])
        if t is None:
            continue
        det = t.determinant
        if not (DET_WINDOW[0] <= det <= DET_WINDOW[1]):
            continue
        err = np.linalg.norm(t.apply(p) - q, axis=1)
        inliers = np.nonzero(err <= tol)[0]
        if inliers.size > best_count:
            best_count = inliers.size
            best_inliers = inliers
    if best_inliers is None or best_count < MIN_CONSENSUS:
        return None
    refit = _fit_affine_lsq(p[best_inliers], q[best_inliers])
    if not (DET_WINDOW[0] <= refit.determinant <= DET_WINDOW[1]):
        return None
    return refit, best_inliers


def iterative_localize(
    matches: list[MatchPair],
    kps: list[Keypoint],
    config: Config,
    rng: np.random.Generator | None = None,
) -> list[tuple[AffineTransform, list[int]]]:
    """Extract transforms until matches run out, then merge T with T^-1."""
    if rng is None:
        rng = np.random.default_rng(config.ransac_seed)
    remaining = list(range(len(matches)))
    found: list[tuple[AffineTransform, list[int]]] = []
    while len(remaining) >= MIN_CONSENSUS and len(found) < config.max_transforms:
        subset = [matches[i] for i in remaining]
        result = ransac_affine(subset, kps, config.ransac_iters, config.ransac_tol, rng)
        if result is None:
            break
        transform, inliers_local = result
        inliers = [remaining[i] for i in inliers_local]
        found.append((transform, inliers))
        taken = set(inliers_local)
        remaining = [remaining[i] for i in range(len(subset)) if i not in taken]
    return _merge_symmetric(found, matches, kps, merge_tol=2.0 * config.ransac_tol)


def _merge_symmetric(found, matches, kps, merge_tol):
    """Collapse pairs of transforms that are inverses of each other."""
    merged: list[tuple[AffineTransform, list[int]]] = []
    consumed = [False] * len(found)
    for a in range(len(found)):
        if consumed[a]:
            continue
        t_a, inl_a = found[a]
        group = list(inl_a)
        for b in range(a + 1, len(found)):
            if consumed[b]:
                continue
            t_b, inl_b = found[b]
            p_b, _ = oriented_endpoints([matches[i] for i in inl_b], kps)
            roundtrip = t_a.apply(t_b.apply(p_b))
            if np.mean(np.linalg.norm(roundtrip - p_b, axis=1)) <= merge_tol:
                consumed[b] = True
                group.extend(inl_b)
        consumed[a] = True
        merged.append((t_a, sorted(group)))
    return merged


def _disc_offsets(radius: int) -> np.ndarray:
    span = np.arange(-radius, radius + 1)
    dy, dx = np.meshgrid(span, span, indexing="ij")
    inside = dy * dy + dx * dx <= radius * radius
    return np.column_stack([dy[inside], dx[inside]])


def _paint_discs(shape, centers: np.ndarray, radius: int) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    if centers.size == 0:
        return mask
    offs = _disc_offsets(radius)
    ys = np.floor(centers[:, 1] + 0.5).astype(np.int64)[:, None] + offs[:, 0][None, :]
    xs = np.floor(centers[:, 0] + 0.5).astype(np.int64)[:, None] + offs[:, 1][None, :]
    valid = (ys >= 0) & (ys < shape[0]) & (xs >= 0) & (xs < shape[1])
    mask[ys[valid], xs[valid]] = True
    return mask


def _bilinear_sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    h, w = img.shape
    xs = np.clip(xs, 0.0, w - 1.000001)
    ys = np.clip(ys, 0.0, h - 1.000001)
    x0 = xs.astype(np.int64)
    y0 = ys.astype(np.int64)
    fx = xs - x0
    fy = ys - y0
    top = img[y0, x0] * (1 - fx) + img[y0, x0 + 1] * fx
    bot = img[y0 + 1, x0] * (1 - fx) + img[y0 + 1, x0 + 1] * fx
    return top * (1 - fy) + bot * fy


def _zncc_against_transform(gray: np.ndarray, pts: np.ndarray, t: AffineTransform) -> np.ndarray:
    """ZNCC between the patch at each point and its transform-mapped patch."""
    r = ZNCC_PATCH_RADIUS
    span = np.arange(-r, r + 1)
    dy, dx = np.meshgrid(span, span, indexing="ij")
    offs = np.column_stack([dx.ravel(), dy.ravel()]).astype(np.float64)  # (S, 2) as (x, y)
    a = gray[
        pts[:, 1][:, None] + offs[:, 1].astype(np.int64)[None, :],
        pts[:, 0][:, None] + offs[:, 0].astype(np.int64)[None, :],
    ].astype(np.float64)
    mapped_center = t.apply(pts[:, [0, 1]].astype(np.float64))
    mapped_offs = offs @ t.matrix.T                      # (S, 2)
    qx = mapped_center[:, 0][:, None] + mapped_offs[:, 0][None, :]
    qy = mapped_center[:, 1][:, None] + mapped_offs[:, 1][None, :]
    b = _bilinear_sample(gray, qx, qy)
    a = a - a.mean(axis=1, keepdims=True)
    b = b - b.mean(axis=1, keepdims=True)
    denom = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
    num = np.einsum("ij,ij->i", a, b)
    out = np.zeros(len(pts))
    ok = denom > 1e-9
    out[ok] = num[ok] / denom[ok]
    return out


def _grow_region(gray: np.ndarray, t: AffineTransform, seeds: np.ndarray) -> np.ndarray:
    """Flood the seed mask over pixels whose ZNCC under ``t`` passes."""
    h, w = gray.shape
    r = ZNCC_PATCH_RADIUS
    margin = np.zeros((h, w), dtype=bool)
    margin[r : h - r, r : w - r] = True
    region = seeds.copy()
    decided = region | ~margin
    structure = np.ones((3, 3), dtype=bool)
    while True:
        frontier = binary_dilation(region, structure) & ~decided
        if not frontier.any():
            break
        pts_yx = np.argwhere(frontier)
        pts = pts_yx[:, ::-1]  # (x, y)
        mapped = t.apply(pts.astype(np.float64))
        feasible = (
            (mapped[:, 0] >= r) & (mapped[:, 0] < w - r)
            & (mapped[:, 1] >= r) & (mapped[:, 1] < h - r)
        )
        scores = np.full(len(pts), -1.0)
        if feasible.any():
            scores[feasible] = _zncc_against_transform(gray, pts[feasible], t)
        grown = scores > ZNCC_THRESHOLD
        region[pts_yx[grown, 0], pts_yx[grown, 1]] = True
        decided[frontier] = True
    return region


def _disc_structure(radius: int) -> np.ndarray:
    span = np.arange(-radius, radius + 1)
    dy, dx = np.meshgrid(span, span, indexing="ij")
    return dy * dy + dx * dx <= radius * radius


def build_mask(
    gray: np.ndarray,
    located: list[tuple[AffineTransform, list[int]]],
    matches: list[MatchPair],
    kps: list[Keypoint],
    s: float,
    original_shape: tuple[int, int],
    config: Config,
) -> DetectionResult:
    """Correlation-grown, morphology-cleaned tamper mask at original resolution."""
    h, w = gray.shape
    gray_f = gray.astype(np.float64)
    combined = np.zeros((h, w), dtype=bool)
    inlier_counts = []
    for transform, inlier_idx in located:
        inlier_counts.append(len(inlier_idx))
        subset = [matches[i] for i in inlier_idx]
        p, q = oriented_endpoints(subset, kps)
        forward = _grow_region(gray_f, transform, _paint_discs((h, w), p, SEED_RADIUS))
        backward = _grow_region(
            gray_f, transform.inverse(), _paint_discs((h, w), q, SEED_RADIUS)
        )
        combined |= forward | backward
    if combined.any():
        combined = binary_closing(combined, structure=_disc_structure(CLOSING_RADIUS))
        combined = binary_opening(combined, structure=_disc_structure(OPENING_RADIUS))
    orig_pixels = original_shape[0] * original_shape[1]
    min_area_resized = config.tampered_area(orig_pixels) * (h * w) / max(orig_pixels, 1)
    combined = _drop_small_components(combined, min_area_resized)
    mask = resize_nearest_mask(combined, original_shape)
    area = int(mask.sum())
    tampered = area >= config.tampered_area(orig_pixels)
    return DetectionResult(
        mask=mask,
        transforms=[t for t, _ in located],
        tampered=tampered,
        stats={
            "matches": len(matches),
            "transforms": len(located),
            "inlier_counts": inlier_counts,
            "mask_area": area,
        },
    )


def _drop_small_components(mask: np.ndarray, min_area: float) -> np.ndarray:
    if not mask.any():
        return mask
    labels, count = label(mask)
    if count == 0:
        return mask
    sizes = np.bincount(labels.ravel())
    keep = sizes >= min_area
    keep[0] = False
    return keep[labels]
