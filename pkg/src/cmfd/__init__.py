"""Copy-move forgery detection using entropy-image keypoints.

Keypoints are detected on a local-entropy transform of the image, described
on the gray image, matched through overlapped gray/entropy-level clustering
with a g2NN ratio test, and localized by iterative affine estimation.
"""

from .config import Config
from .entropy import compute_entropy_map, sample_entropy
from .evaluation import (
    ConfusionCounts,
    DatasetEntry,
    MetricsReport,
    confusion_image,
    confusion_pixels,
    load_dataset,
    metrics,
    run_benchmark,
)
from .forge import forge_copy_move, synthetic_corpus, synthetic_forgery
from .image_io import load_image, resize_bicubic, to_grayscale
from .localization import (
    AffineTransform,
    DetectionResult,
    build_mask,
    iterative_localize,
    ransac_affine,
)
from .matcher import ClusterGroup, MatchPair, entropy_level_subgroups, gray_level_groups, match_all
from .pipeline import FeatureSet, PipelineOutput, extract_features, run_detection
from .scale_space import Keypoint, Pyramid, build_dog, build_gaussian_pyramid, detect_keypoints

__version__ = "0.1.0"

__all__ = [
    "AffineTransform",
    "ClusterGroup",
    "Config",
    "ConfusionCounts",
    "DatasetEntry",
    "DetectionResult",
    "FeatureSet",
    "Keypoint",
    "MatchPair",
    "MetricsReport",
    "PipelineOutput",
    "Pyramid",
    "build_dog",
    "build_gaussian_pyramid",
    "build_mask",
    "compute_entropy_map",
    "confusion_image",
    "confusion_pixels",
    "detect_keypoints",
    "entropy_level_subgroups",
    "extract_features",
    "forge_copy_move",
    "gray_level_groups",
    "iterative_localize",
    "load_dataset",
    "load_image",
    "match_all",
    "metrics",
    "ransac_affine",
    "resize_bicubic",
    "run_benchmark",
    "run_detection",
    "sample_entropy",
    "synthetic_corpus",
    "synthetic_forgery",
    "to_grayscale",
]
