"""Dataset ingestion, confusion counting, metrics, benchmark harness.

Image-level scoring uses the tampered/original verdict; pixel-level
scoring pools confusion counts over the tampered images only
(micro-average), with a per-image macro average reported alongside.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import Config
from .image_io import load_image, load_mask, to_grayscale
from .pipeline import run_detection

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")
LAYOUTS = ("grip", "cmh", "generic-pairs")

_TAMPERED_DIRS = ("tampered", "forged", "forgery", "fake")
_ORIGINAL_DIRS = ("original", "pristine", "authentic", "au")
_MASK_DIRS = ("masks", "gt", "groundtruth", "ground_truth")


@dataclass
class DatasetEntry:
    image_path: Path
    mask_path: Path | None
    is_tampered: bool
    group: int | None = None


def _images_in(directory: Path) -> list[Path]:
    return sorted(
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    )


def _find_subdir(root: Path, names: tuple[str, ...]) -> Path | None:
    for child in sorted(root.iterdir()):
        if child.is_dir() and child.name.lower() in names:
            return child
    return None


def _match_mask(mask_dir: Path, stem: str) -> Path | None:
    for candidate in _images_in(mask_dir):
        cstem = candidate.stem
        if cstem == stem or cstem == f"{stem}_gt" or cstem == f"{stem}_mask":
            return candidate
    return None


def load_dataset(root: str | Path, layout: str = "generic-pairs") -> list[DatasetEntry]:
    """Enumerate a dataset directory into deterministic, ordered entries.

    Layouts:
      * ``generic-pairs``: flat directory where ``name.png`` is tampered iff
        ``name_gt.png`` exists; images without a mask are originals.
      * ``grip``: ``tampered/`` + ``original/`` + ``masks/`` subdirectories,
        masks matched to tampered images by stem.
      * ``cmh``: like generic-pairs but recursive, with a group number parsed
        from path components such as ``CMH4`` or ``group_4``.
    """
    root = Path(root)
    if not root.is_dir():
        raise NotADirectoryError(f"dataset root is not a directory: {root}")
    if layout not in LAYOUTS:
        raise ValueError(f"unknown dataset layout {layout!r}; expected one of {LAYOUTS}")
    if layout == "grip":
        entries = _load_grip(root)
    elif layout == "cmh":
        entries = _load_pairs_recursive(root, parse_groups=True)
    else:
        entries = _load_pairs(root)
    if not entries:
        logger.warning("dataset at %s produced no entries", root)
    return entries


def _load_grip(root: Path) -> list[DatasetEntry]:
    tampered_dir = _find_subdir(root, _TAMPERED_DIRS)
    original_dir = _find_subdir(root, _ORIGINAL_DIRS)
    mask_dir = _find_subdir(root, _MASK_DIRS)
    if tampered_dir is None or mask_dir is None:
        raise FileNotFoundError(
            f"GRIP layout needs {_TAMPERED_DIRS[0]}/ and {_MASK_DIRS[0]}/ under {root}"
        )
    entries = []
    for img in _images_in(tampered_dir):
        mask = _match_mask(mask_dir, img.stem)
        if mask is None:
            raise FileNotFoundError(f"no ground-truth mask for tampered image {img}")
        entries.append(DatasetEntry(image_path=img, mask_path=mask, is_tampered=True))
    if original_dir is not None:
        for img in _images_in(original_dir):
            entries.append(DatasetEntry(image_path=img, mask_path=None, is_tampered=False))
    return entries


def _pair_entries(images: list[Path]) -> list[DatasetEntry]:
    stems = {p.stem: p for p in images}
    entries = []
    for img in images:
        if img.stem.endswith("_gt") or img.stem.endswith("_mask"):
            continue
        mask = stems.get(f"{img.stem}_gt") or stems.get(f"{img.stem}_mask")
        entries.append(
            DatasetEntry(image_path=img, mask_path=mask, is_tampered=mask is not None)
        )
    return entries


def _load_pairs(root: Path) -> list[DatasetEntry]:
    return _pair_entries(_images_in(root))


def _parse_group(path: Path, root: Path) -> int | None:
    import re

    rel = path.relative_to(root)
    for part in rel.parts:
        m = re.search(r"(?:cmh|group)[_\- ]?(\d+)", part, re.IGNORECASE)
        if m:
            return int(m.group(1))
    return None


def _load_pairs_recursive(root: Path, parse_groups: bool) -> list[DatasetEntry]:
    entries = []
    directories = [root] + sorted(p for p in root.rglob("*") if p.is_dir())
    for directory in directories:
        for entry in _pair_entries(_images_in(directory)):
            if parse_groups:
                entry.group = _parse_group(entry.image_path, root)
            entries.append(entry)
    entries.sort(key=lambda e: e.image_path)
    return entries


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion_pixels(pred: np.ndarray, truth: np.ndarray) -> ConfusionCounts:
    if pred.shape != truth.shape:
        raise ValueError(f"mask shape mismatch: {pred.shape} vs {truth.shape}")
    pred = pred.astype(bool)
    truth = truth.astype(bool)
    tp = int(np.count_nonzero(pred & truth))
    fp = int(np.count_nonzero(pred & ~truth))
    fn = int(np.count_nonzero(~pred & truth))
    tn = int(np.count_nonzero(~pred & ~truth))
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def confusion_image(verdict: bool, is_tampered: bool) -> ConfusionCounts:
    if is_tampered:
        return ConfusionCounts(tp=int(verdict), fn=int(not verdict))
    return ConfusionCounts(fp=int(verdict), tn=int(not verdict))


def metrics(c: ConfusionCounts) -> tuple[float | None, float | None, float | None]:
    """(TPR, FPR, F); a metric whose denominator is zero comes back as None."""
    tpr = c.tp / (c.tp + c.fn) if (c.tp + c.fn) > 0 else None
    fpr = c.fp / (c.tn + c.fp) if (c.tn + c.fp) > 0 else None
    f = 2 * c.tp / (2 * c.tp + c.fp + c.fn) if (2 * c.tp + c.fp + c.fn) > 0 else None
    return tpr, fpr, f


@dataclass
class MetricsReport:
    image_counts: ConfusionCounts
    pixel_counts: ConfusionCounts
    tpr: float | None
    fpr: float | None
    f_image: float | None
    f_pixel: float | None
    f_pixel_macro: float | None
    rows: list[dict] = field(default_factory=list)
    mean_seconds: float = 0.0

    def summary_dict(self) -> dict:
        return {
            "image": {
                "TPR": self.tpr,
                "FPR": self.fpr,
                "F": self.f_image,
                "counts": vars(self.image_counts),
            },
            "pixel": {
                "F_micro": self.f_pixel,
                "F_macro": self.f_pixel_macro,
                "counts": vars(self.pixel_counts),
            },
            "mean_seconds": self.mean_seconds,
            "n_images": len(self.rows),
        }


def evaluate_entry(entry: DatasetEntry, config: Config) -> dict:
    """Run the pipeline on one dataset entry; failures become negatives."""
    row = {
        "path": str(entry.image_path),
        "is_tampered": entry.is_tampered,
        "verdict": False,
        "tp": 0,
        "fp": 0,
        "fn": 0,
        "tn": 0,
        "seconds": 0.0,
        "error": "",
    }
    start = time.perf_counter()
    try:
        rgb = load_image(entry.image_path)
        gray = to_grayscale(rgb)
        output = run_detection(gray, config)
        row["verdict"] = bool(output.detection.tampered)
        if entry.is_tampered:
            truth = load_mask(entry.mask_path)
            counts = confusion_pixels(output.detection.mask, truth)
            row.update(tp=counts.tp, fp=counts.fp, fn=counts.fn, tn=counts.tn)
    except Exception as err:  # noqa: BLE001 - a bad image must not sink the run
        row["error"] = str(err)
        if entry.is_tampered and entry.mask_path is not None:
            try:
                truth = load_mask(entry.mask_path)
                row["fn"] = int(np.count_nonzero(truth))
                row["tn"] = int(truth.size - np.count_nonzero(truth))
            except Exception:
                pass
    row["seconds"] = time.perf_counter() - start
    return row


def _worker(args) -> dict:
    entry, config = args
    return evaluate_entry(entry, config)


def run_benchmark(
    entries: list[DatasetEntry],
    config: Config,
    out_dir: str | Path | None = None,
    workers: int | None = None,
) -> MetricsReport:
    """Score a dataset; optionally write per-image CSV and a JSON summary."""
    if workers is None:
        workers = config.effective_threads()
    if workers > 1 and len(entries) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_worker, [(e, config) for e in entries]))
    else:
        rows = [evaluate_entry(e, config) for e in entries]

    image_counts = ConfusionCounts()
    pixel_counts = ConfusionCounts()
    per_image_f = []
    for entry, row in zip(entries, rows):
        image_counts += confusion_image(row["verdict"], entry.is_tampered)
        if entry.is_tampered:
            c = ConfusionCounts(tp=row["tp"], fp=row["fp"], fn=row["fn"], tn=row["tn"])
            pixel_counts += c
            _, _, f = metrics(c)
            if f is not None:
                per_image_f.append(f)
    tpr, fpr, f_image = metrics(image_counts)
    _, _, f_pixel = metrics(pixel_counts)
    report = MetricsReport(
        image_counts=image_counts,
        pixel_counts=pixel_counts,
        tpr=tpr,
        fpr=fpr,
        f_image=f_image,
        f_pixel=f_pixel,
        f_pixel_macro=float(np.mean(per_image_f)) if per_image_f else None,
        rows=rows,
        mean_seconds=float(np.mean([r["seconds"] for r in rows])) if rows else 0.0,
    )
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def write_report(report: MetricsReport, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "per_image.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["path", "verdict", "TP", "FP", "FN", "TN", "seconds", "error"])
        for row in report.rows:
            writer.writerow(
                [
                    row["path"],
                    int(row["verdict"]),
                    row["tp"],
                    row["fp"],
                    row["fn"],
                    row["tn"],
                    f"{row['seconds']:.3f}",
                    row["error"],
                ]
            )
    summary = report.summary_dict()
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
