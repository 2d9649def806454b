"""End-to-end detection pipeline.

Stages: bicubic resize -> local entropy image -> DoG keypoints on the
normalized entropy field -> orientation + descriptors on the gray image ->
hierarchical clustered g2NN matching -> iterative RANSAC localization ->
correlation-grown tamper mask at the original resolution.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import Config
from .descriptor import attach_values, describe_keypoints
from .entropy import compute_entropy_map
from .image_io import resize_bicubic
from .localization import AffineTransform, DetectionResult, build_mask, iterative_localize
from .matcher import ENTROPY_CLUSTER_CEILING, MatchPair, match_all
from .scale_space import Keypoint, Pyramid, build_dog, build_gaussian_pyramid

DETECTION_FIELDS = ("entropy", "gray")


class StageError(RuntimeError):
    """Pipeline failure tagged with the stage that raised it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class FeatureSet:
    gray: np.ndarray                 # resized working image, uint8
    entropy: np.ndarray              # same shape, float bits
    keypoints: list[Keypoint]        # oriented, gray/entropy values attached
    descriptors: np.ndarray          # (N, 128)
    usable: np.ndarray               # (N,) bool
    dropped_keypoints: int
    timings: dict = field(default_factory=dict)


@dataclass
class PipelineOutput:
    detection: DetectionResult
    features: FeatureSet
    matches: list[MatchPair]
    located: list[tuple[AffineTransform, list[int]]]
    match_stats: dict
    timings: dict


def _run_stage(stage: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as err:
        raise StageError(stage, err) from err


def extract_features(
    gray_original: np.ndarray, config: Config, detect_on: str = "entropy"
) -> FeatureSet:
    """Resize, build the entropy image, detect and describe keypoints.

    ``detect_on`` selects the detection field: the entropy image (default)
    or the gray image itself for baseline comparisons.  Descriptors always
    come from the gray image.
    """
    if detect_on not in DETECTION_FIELDS:
        raise ValueError(f"detect_on must be one of {DETECTION_FIELDS}, got {detect_on!r}")
    timings: dict[str, float] = {}

    t0 = time.perf_counter()
    gray = _run_stage("preprocess", resize_bicubic, gray_original, config.s)
    emap = _run_stage("preprocess", compute_entropy_map, gray, config.r_e)
    timings["preprocess"] = time.perf_counter() - t0

    t0 = time.perf_counter()

    def _detect():
        if detect_on == "entropy":
            fld = emap / ENTROPY_CLUSTER_CEILING
        else:
            fld = gray / 255.0
        pyr = build_gaussian_pyramid(fld, config.sigma0, config.scales_per_octave)
        dog = build_dog(pyr)
        from .scale_space import detect_keypoints

        return detect_keypoints(dog, config.t_con, config.edge_ratio), pyr.num_octaves

    kps, num_octaves = _run_stage("detect", _detect)
    timings["detect"] = time.perf_counter() - t0

    t0 = time.perf_counter()

    def _describe():
        gray_pyr = build_gaussian_pyramid(
            gray / 255.0, config.sigma0, config.scales_per_octave, octaves=num_octaves
        )
        attached, dropped = attach_values(kps, gray, emap)
        oriented, descriptors, usable = describe_keypoints(gray_pyr, attached)
        return oriented, descriptors, usable, dropped

    oriented, descriptors, usable, dropped = _run_stage("describe", _describe)
    timings["describe"] = time.perf_counter() - t0

    return FeatureSet(
        gray=gray,
        entropy=emap,
        keypoints=oriented,
        descriptors=descriptors,
        usable=usable,
        dropped_keypoints=dropped,
        timings=timings,
    )


def run_detection(
    gray_original: np.ndarray,
    config: Config,
    features: FeatureSet | None = None,
) -> PipelineOutput:
    """Full pipeline on a grayscale image at its original resolution."""
    if features is None:
        features = extract_features(gray_original, config)
    timings = dict(features.timings)

    t0 = time.perf_counter()
    matches, match_stats = _run_stage(
        "match",
        match_all,
        features.keypoints,
        features.descriptors,
        features.usable,
        config,
    )
    timings["match"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    located = _run_stage("localize", iterative_localize, matches, features.keypoints, config)
    timings["localize"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    detection = _run_stage(
        "mask",
        build_mask,
        features.gray,
        located,
        matches,
        features.keypoints,
        config.s,
        gray_original.shape,
        config,
    )
    timings["mask"] = time.perf_counter() - t0

    detection.stats.update(
        {
            "keypoints": len(features.keypoints),
            "dropped_keypoints": features.dropped_keypoints,
            "match_groups": match_stats["groups"],
            "comparisons": match_stats["comparisons"],
        }
    )
    return PipelineOutput(
        detection=detection,
        features=features,
        matches=matches,
        located=located,
        match_stats=match_stats,
        timings=timings,
    )
