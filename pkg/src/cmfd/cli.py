"""Command-line front end: detect, evaluate, analyze, forge.

Exit codes for ``detect``: 0 = clean, 1 = tampered, 2 = error.  Every other
subcommand returns 0 on success and 2 on error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .config import Config
from .evaluation import load_dataset, run_benchmark
from .forge import forge_copy_move
from .image_io import (
    load_image,
    save_mask,
    save_rgb_png,
    save_u16_png,
    to_grayscale,
    write_overlay,
)
from .matcher import ENTROPY_CLUSTER_CEILING, match_all
from .pipeline import StageError, extract_features, run_detection

_CONFIG_FLOATS = (
    "s", "t_con", "sigma0", "edge_ratio", "step3", "step4", "t_ratio",
    "min_spatial_distance", "ransac_tol", "min_region_area_fraction",
)
_CONFIG_INTS = (
    "r_e", "scales_per_octave", "step1", "step2", "ransac_iters",
    "ransac_seed", "max_transforms", "threads",
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="key=value config file")
    group = parser.add_argument_group("parameters")
    for name in _CONFIG_FLOATS:
        group.add_argument(f"--{name.replace('_', '-')}", type=float, default=None)
    for name in _CONFIG_INTS:
        group.add_argument(f"--{name.replace('_', '-')}", type=int, default=None)
    group.add_argument("--exhaustive-scan", action="store_true", default=None)


def _build_config(args: argparse.Namespace) -> Config:
    if args.config is not None:
        config = Config.load(args.config)
    else:
        config = Config()
    overrides = {}
    for f in dataclasses.fields(Config):
        value = getattr(args, f.name, None)
        if value is not None:
            overrides[f.name] = value
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config


def _cmd_detect(args: argparse.Namespace) -> int:
    config = _build_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rgb = load_image(args.image)
    gray = to_grayscale(rgb)
    output = run_detection(gray, config)
    detection = output.detection

    save_mask(detection.mask, out_dir / "mask.png")
    endpoints = [
        (
            output.features.keypoints[m.i].x / config.s,
            output.features.keypoints[m.i].y / config.s,
            output.features.keypoints[m.j].x / config.s,
            output.features.keypoints[m.j].y / config.s,
        )
        for m in output.matches
    ]
    write_overlay(gray, endpoints, detection.mask, out_dir / "overlay.png")
    record = {
        "verdict": detection.tampered,
        "transforms": [t.to_dict() for t in detection.transforms],
        "inlier_counts": detection.stats.get("inlier_counts", []),
        "stats": {k: v for k, v in detection.stats.items() if k != "inlier_counts"},
        "timings": output.timings,
    }
    (out_dir / "result.json").write_text(json.dumps(record, indent=2, sort_keys=True))
    if args.dump_matches:
        _dump_matches(output, Path(args.dump_matches))
    print(f"{args.image}: {'TAMPERED' if detection.tampered else 'clean'} "
          f"(mask area {detection.stats['mask_area']} px, "
          f"{len(output.matches)} matches, {len(detection.transforms)} transforms)")
    return 1 if detection.tampered else 0


def _dump_matches(output, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x1", "y1", "x2", "y2", "distance"])
        for m in output.matches:
            a = output.features.keypoints[m.i]
            b = output.features.keypoints[m.j]
            writer.writerow([a.x, a.y, b.x, b.y, m.distance])


def _cmd_evaluate(args: argparse.Namespace) -> int:
    config = _build_config(args)
    entries = load_dataset(args.root, layout=args.layout)
    if not entries:
        print(f"error: dataset at {args.root} is empty", file=sys.stderr)
        return 2
    report = run_benchmark(entries, config, out_dir=args.out, workers=args.workers)
    fmt = lambda v: "undefined" if v is None else f"{100.0 * v:.2f}"
    print(
        f"images={len(report.rows)}  TPR={fmt(report.tpr)}  FPR={fmt(report.fpr)}  "
        f"F-i={fmt(report.f_image)}  F-p={fmt(report.f_pixel)}  "
        f"time={report.mean_seconds:.1f}s/image"
    )
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    config = _build_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {}
    for image_path in args.images:
        name = Path(image_path).stem
        rgb = load_image(image_path)
        gray = to_grayscale(rgb)
        features = extract_features(gray, config)
        entry = {"keypoints": len(features.keypoints)}

        if args.entropy_png:
            scaled = np.floor(
                features.entropy / ENTROPY_CLUSTER_CEILING * 65535 + 0.5
            ).astype(np.uint16)
            save_u16_png(scaled, out_dir / f"{name}_entropy.png")
        if args.keypoints_csv:
            _write_keypoints_csv(features.keypoints, out_dir / f"{name}_keypoints.csv")
        if args.contrast_maps:
            gray_map, entropy_map, stats = analysis.contrast_maps(
                features.gray, features.entropy
            )
            save_rgb_png(gray_map, out_dir / f"{name}_contrast_gray.png")
            save_rgb_png(entropy_map, out_dir / f"{name}_contrast_entropy.png")
            entry["contrast"] = stats
        if args.assumption_ratio:
            entry["assumption_ratio_entropy"] = analysis.assumption_ratio(
                features.keypoints, features.gray.shape
            )
            baseline = extract_features(gray, config, detect_on="gray")
            entry["assumption_ratio_gray"] = analysis.assumption_ratio(
                baseline.keypoints, baseline.gray.shape
            )
        if args.entropy_cdf or args.recall_sweep:
            bruteforce, _ = match_all(
                features.keypoints, features.descriptors, features.usable, config, "brute"
            )
            if args.entropy_cdf and bruteforce:
                cdf = analysis.entropy_diff_cdf(bruteforce, features.keypoints)
                _write_cdf_csv(cdf, out_dir / f"{name}_entropy_cdf.csv")
                entry["cdf_at_1"] = cdf.at(1.0)
            if args.recall_sweep and bruteforce:
                sweep = np.round(np.arange(0.0, args.step4_max + 1e-9, args.step4_step), 4)
                table = analysis.recall_vs_bruteforce(
                    features.keypoints, features.descriptors, features.usable,
                    config, sweep, bruteforce,
                )
                _write_recall_csv(table, out_dir / f"{name}_recall.csv")
                entry["recall_at_0"] = table[0][1]
        summary[name] = entry
    (out_dir / "analysis.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _write_keypoints_csv(kps, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "sigma", "theta", "gray", "entropy"])
        for kp in kps:
            writer.writerow(
                [kp.x, kp.y, kp.sigma, kp.theta, kp.gray_value, kp.entropy_value]
            )


def _write_cdf_csv(cdf, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["delta_entropy", "cumulative_fraction"])
        for v, f in zip(cdf.values, cdf.fractions):
            writer.writerow([v, f])


def _write_recall_csv(table, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step4", "recall"])
        for step4, recall in table:
            writer.writerow([step4, recall])


def _parse_tuple(text: str, n: int, kind=float) -> tuple:
    parts = text.split(",")
    if len(parts) != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated values, got {text!r}")
    return tuple(kind(p) for p in parts)


def _cmd_forge(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rgb = load_image(args.image)
    tampered, mask = forge_copy_move(
        rgb,
        src_rect=tuple(int(v) for v in args.src),
        translate=args.translate,
        rotate=args.rotate,
        scale=args.scale,
    )
    name = args.name or f"{Path(args.image).stem}_forged"
    save_rgb_png(tampered, out_dir / f"{name}.png")
    save_mask(mask, out_dir / f"{name}_gt.png")
    print(f"wrote {out_dir / (name + '.png')} and ground truth "
          f"({int(mask.sum())} tampered pixels)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cmfd",
        description="Copy-move forgery detection via entropy-image keypoints",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_detect = sub.add_parser("detect", help="analyze one image for copy-move forgery")
    p_detect.add_argument("image", type=Path)
    p_detect.add_argument("-o", "--out", type=Path, required=True)
    p_detect.add_argument("--dump-matches", type=Path, default=None)
    _add_config_flags(p_detect)
    p_detect.set_defaults(func=_cmd_detect)

    p_eval = sub.add_parser("evaluate", help="score a dataset directory")
    p_eval.add_argument("root", type=Path)
    p_eval.add_argument("--layout", choices=["grip", "cmh", "generic-pairs"],
                        default="generic-pairs")
    p_eval.add_argument("-o", "--out", type=Path, required=True)
    p_eval.add_argument("--workers", type=int, default=None)
    _add_config_flags(p_eval)
    p_eval.set_defaults(func=_cmd_evaluate)

    p_an = sub.add_parser("analyze", help="diagnostic maps, tables, and sweeps")
    p_an.add_argument("images", nargs="+", type=Path)
    p_an.add_argument("-o", "--out", type=Path, required=True)
    p_an.add_argument("--entropy-png", action="store_true")
    p_an.add_argument("--keypoints-csv", action="store_true")
    p_an.add_argument("--contrast-maps", action="store_true")
    p_an.add_argument("--assumption-ratio", action="store_true")
    p_an.add_argument("--entropy-cdf", action="store_true")
    p_an.add_argument("--recall-sweep", action="store_true")
    p_an.add_argument("--step4-max", type=float, default=0.5)
    p_an.add_argument("--step4-step", type=float, default=0.01)
    _add_config_flags(p_an)
    p_an.set_defaults(func=_cmd_analyze)

    p_forge = sub.add_parser("forge", help="generate a synthetic copy-move forgery")
    p_forge.add_argument("image", type=Path)
    p_forge.add_argument("-o", "--out", type=Path, required=True)
    p_forge.add_argument("--src", type=lambda s: _parse_tuple(s, 4, int), required=True,
                         metavar="X,Y,W,H")
    p_forge.add_argument("--translate", type=lambda s: _parse_tuple(s, 2, float),
                         default=(0.0, 0.0), metavar="DX,DY")
    p_forge.add_argument("--rotate", type=float, default=0.0)
    p_forge.add_argument("--scale", type=float, default=1.0)
    p_forge.add_argument("--name", type=str, default=None)
    p_forge.set_defaults(func=_cmd_forge)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (OSError, ValueError, NotADirectoryError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
