"""Difference-of-Gaussians keypoint detector.

Builds a Gaussian pyramid over an arbitrary 2-D field (the pipeline feeds it
the entropy image normalized to [0, 1], or the gray image normalized by 255
for ablations), takes adjacent-level differences, and extracts sub-pixel
space-scale extrema filtered by refined contrast and an optional
principal-curvature edge test.

The input field is treated as blur-free: octave 0 level j carries absolute
scale sigma0 * k**j with k = 2**(1/scales_per_octave).  No initial
upsampling happens here; the pipeline's bicubic resize plays that role.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter, maximum_filter, minimum_filter

MIN_OCTAVE_SIZE = 16


@dataclass
class Keypoint:
    x: float                        # resized-image (octave 0) coordinates
    y: float
    sigma: float                    # absolute scale in octave-0 pixels
    theta: float | None = None      # dominant orientation, degrees [0, 360)
    gray_value: int | None = None
    entropy_value: float | None = None
    octave: int = -1                # detection bookkeeping; -1 = derive from sigma
    level: int = -1
    response: float = 0.0


@dataclass
class Pyramid:
    octaves: list[list[np.ndarray]]
    sigma0: float
    scales_per_octave: int

    @property
    def num_octaves(self) -> int:
        return len(self.octaves)

    def level_sigma(self, octave: int, level: int) -> float:
        """Absolute scale of a level, in octave-0 pixel units."""
        return self.sigma0 * 2.0 ** (octave + level / self.scales_per_octave)

    def level_sigma_rel(self, octave: int, level: int) -> float:
        """Scale of a level in its own octave's pixel units."""
        return self.sigma0 * 2.0 ** (level / self.scales_per_octave)


def max_octaves(shape: tuple[int, int], min_size: int = MIN_OCTAVE_SIZE) -> int:
    smallest = min(shape)
    if smallest < min_size:
        return 0
    return int(np.floor(np.log2(smallest / min_size))) + 1


def build_gaussian_pyramid(
    field: np.ndarray,
    sigma0: float,
    scales_per_octave: int,
    octaves: int | None = None,
) -> Pyramid:
    """Incrementally blurred octaves with scales_per_octave + 3 levels each."""
    if sigma0 <= 0 or scales_per_octave < 1:
        raise ValueError("sigma0 must be positive and scales_per_octave >= 1")
    field = np.asarray(field, dtype=np.float64)
    if octaves is None:
        octaves = max_octaves(field.shape)
    if octaves < 1:
        raise ValueError(
            f"field of shape {field.shape} is too small for one "
            f"{MIN_OCTAVE_SIZE}x{MIN_OCTAVE_SIZE} octave"
        )
    k = 2.0 ** (1.0 / scales_per_octave)
    n_levels = scales_per_octave + 3
    all_octaves: list[list[np.ndarray]] = []
    base = gaussian_filter(field, sigma0, mode="nearest")
    for o in range(octaves):
        levels = [base]
        for j in range(1, n_levels):
            inc = sigma0 * np.sqrt(k ** (2 * j) - k ** (2 * (j - 1)))
            levels.append(gaussian_filter(levels[-1], inc, mode="nearest"))
        all_octaves.append(levels)
        # the level at doubled scale becomes the next octave's base
        base = levels[scales_per_octave][::2, ::2]
    return Pyramid(octaves=all_octaves, sigma0=sigma0, scales_per_octave=scales_per_octave)


def build_dog(pyr: Pyramid) -> Pyramid:
    """Adjacent-level differences; DoG level j = L(j+1) - L(j)."""
    dog = [
        [levels[j + 1] - levels[j] for j in range(len(levels) - 1)]
        for levels in pyr.octaves
    ]
    return Pyramid(octaves=dog, sigma0=pyr.sigma0, scales_per_octave=pyr.scales_per_octave)


def detect_keypoints(dog: Pyramid, t_con: float, edge_ratio: float = 10.0) -> list[Keypoint]:
    """Strict 26-neighbor extrema, one quadratic refinement step, filtering.

    A candidate survives when its refined contrast exceeds ``t_con`` and,
    for ``edge_ratio > 0``, the ratio test on the 2x2 spatial Hessian passes.
    Coordinates and scales are reported in octave-0 units.
    """
    if t_con < 0:
        raise ValueError(f"contrast threshold must be >= 0, got {t_con}")
    s = dog.scales_per_octave
    keypoints: list[Keypoint] = []
    for o, levels in enumerate(dog.octaves):
        if len(levels) < 3:
            continue
        stack = np.stack(levels)
        ls, ys, xs = _candidate_extrema(stack, 0.5 * t_con)
        if ls.size == 0:
            continue
        kps = _refine_and_filter(stack, ls, ys, xs, t_con, edge_ratio, o, s, dog.sigma0)
        keypoints.extend(kps)
    return keypoints


def _candidate_extrema(stack: np.ndarray, prefilter: float):
    """Strict extrema over the 3x3x3 neighborhood, borders excluded."""
    cube_max = maximum_filter(stack, size=3, mode="nearest")
    cube_min = minimum_filter(stack, size=3, mode="nearest")
    cand = (stack >= cube_max) | (stack <= cube_min)
    cand &= np.abs(stack) >= prefilter
    cand[0] = cand[-1] = False
    cand[:, 0, :] = cand[:, -1, :] = False
    cand[:, :, 0] = cand[:, :, -1] = False
    ls, ys, xs = np.nonzero(cand)
    if ls.size == 0:
        return ls, ys, xs
    # enforce strictness against all 26 neighbors
    center = stack[ls, ys, xs]
    is_max = np.ones(ls.size, dtype=bool)
    is_min = np.ones(ls.size, dtype=bool)
    for dl in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dl == dy == dx == 0:
                    continue
                nb = stack[ls + dl, ys + dy, xs + dx]
                is_max &= center > nb
                is_min &= center < nb
    keep = is_max | is_min
    return ls[keep], ys[keep], xs[keep]


def _refine_and_filter(stack, ls, ys, xs, t_con, edge_ratio, octave, s, sigma0):
    d = stack
    center = d[ls, ys, xs]
    gx = 0.5 * (d[ls, ys, xs + 1] - d[ls, ys, xs - 1])
    gy = 0.5 * (d[ls, ys + 1, xs] - d[ls, ys - 1, xs])
    gs = 0.5 * (d[ls + 1, ys, xs] - d[ls - 1, ys, xs])
    dxx = d[ls, ys, xs + 1] - 2 * center + d[ls, ys, xs - 1]
    dyy = d[ls, ys + 1, xs] - 2 * center + d[ls, ys - 1, xs]
    dss = d[ls + 1, ys, xs] - 2 * center + d[ls - 1, ys, xs]
    dxy = 0.25 * (
        d[ls, ys + 1, xs + 1] - d[ls, ys + 1, xs - 1]
        - d[ls, ys - 1, xs + 1] + d[ls, ys - 1, xs - 1]
    )
    dxs = 0.25 * (
        d[ls + 1, ys, xs + 1] - d[ls + 1, ys, xs - 1]
        - d[ls - 1, ys, xs + 1] + d[ls - 1, ys, xs - 1]
    )
    dys = 0.25 * (
        d[ls + 1, ys + 1, xs] - d[ls + 1, ys - 1, xs]
        - d[ls - 1, ys + 1, xs] + d[ls - 1, ys - 1, xs]
    )
    grad = np.stack([gx, gy, gs], axis=1)
    hess = np.empty((ls.size, 3, 3))
    hess[:, 0, 0] = dxx
    hess[:, 1, 1] = dyy
    hess[:, 2, 2] = dss
    hess[:, 0, 1] = hess[:, 1, 0] = dxy
    hess[:, 0, 2] = hess[:, 2, 0] = dxs
    hess[:, 1, 2] = hess[:, 2, 1] = dys

    offset = np.zeros_like(grad)
    solvable = np.abs(np.linalg.det(hess)) > 1e-12
    if solvable.any():
        offset[solvable] = np.linalg.solve(hess[solvable], -grad[solvable])
    np.clip(offset, -0.5, 0.5, out=offset)

    refined = center + 0.5 * np.einsum("ij,ij->i", grad, offset)
    keep = np.abs(refined) > t_con
    if edge_ratio > 0:
        tr = dxx + dyy
        det2 = dxx * dyy - dxy * dxy
        keep &= (det2 > 0) & (edge_ratio * tr * tr < (edge_ratio + 1) ** 2 * det2)

    scale_factor = float(2**octave)
    out = []
    for i in np.nonzero(keep)[0]:
        level_ref = ls[i] + offset[i, 2]
        out.append(
            Keypoint(
                x=(xs[i] + offset[i, 0]) * scale_factor,
                y=(ys[i] + offset[i, 1]) * scale_factor,
                sigma=sigma0 * 2.0 ** (octave + level_ref / s),
                octave=octave,
                level=int(np.clip(np.floor(level_ref + 0.5), 0, s + 2)),
                response=float(np.abs(refined[i])),
            )
        )
    return out


def keypoint_xy(kps: list[Keypoint]) -> np.ndarray:
    """(N, 2) array of keypoint coordinates."""
    if not kps:
        return np.zeros((0, 2))
    return np.array([[kp.x, kp.y] for kp in kps], dtype=np.float64)
