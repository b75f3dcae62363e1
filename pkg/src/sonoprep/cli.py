"""Command-line interface.

Subcommands: ``dedup`` (screen a manifest), ``roi`` (sector mask for one
frame), ``mask`` (mask plan for one frame), ``pipeline`` (full batch run),
``verify`` (re-check invariants of emitted plan files). Flags mirror the
config keys; ``--config FILE`` loads defaults and explicit flags override.

Exit codes: 0 success, 1 batch-level error, 2 config/manifest error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import dedup as dd
from . import masking as mk
from . import pipeline as pl
from . import region as rg
from .errors import SonoprepError, ConfigError, ManifestError
from .imaging import load_frame, patchify

logger = logging.getLogger("sonoprep")

_CONFIG_FLAGS = [
    ("threshold_vis", float),
    ("threshold_sem", float),
    ("embedding_file", str),
    ("bg_threshold", float),
    ("close_radius", int),
    ("tau", float),
    ("mu", float),
    ("sigma", float),
    ("k", float),
    ("lambda", float),
    ("mask_ratio", float),
    ("target_fraction", float),
    ("patch_size", int),
    ("dct_size", int),
    ("workers", int),
    ("seed", int),
]


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, help="JSON config file providing defaults")
    for key, typ in _CONFIG_FLAGS:
        parser.add_argument(f"--{key.replace('_', '-')}", type=typ, dest=f"cfg_{key}")


def _resolve_config(args: argparse.Namespace) -> pl.PipelineConfig:
    data = {}
    if getattr(args, "config", None):
        data = pl.PipelineConfig.load_json(args.config).to_dict()
    overrides = {
        key: getattr(args, f"cfg_{key}")
        for key, _ in _CONFIG_FLAGS
        if getattr(args, f"cfg_{key}", None) is not None
    }
    data.update(overrides)
    return pl.PipelineConfig.from_dict(data) if data else pl.PipelineConfig().validate()


def _load_roi_pgm(path) -> rg.RoiMask:
    import numpy as np
    from PIL import Image

    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return rg.RoiMask(mask=(arr > 127).astype(np.uint8))


def _cmd_dedup(args) -> int:
    config = _resolve_config(args)
    manifest = pl.Manifest.load_jsonl(args.manifest)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = pl.run_screening(manifest, config)
    result.report.write_csv(out / "dedup_report.csv")
    pl.Manifest(entries=result.retained_entries).write_jsonl(out / "retained.jsonl")
    print(
        f"dedup: {len(manifest)} in, {result.retained_after_visual} after visual, "
        f"{len(result.retained_entries)} after semantic "
        f"(retained fraction {result.report.retained_fraction:.3f})"
    )
    return 0


def _cmd_roi(args) -> int:
    config = _resolve_config(args)
    frame = load_frame(args.image, args.id or Path(args.image).stem, "cli", 0)
    roi = rg.detect_roi(frame, config.bg_threshold, config.close_radius)
    roi.write_pgm(args.output)
    print(f"roi: {roi.pixel_count} pixels ({roi.pixel_count / roi.mask.size:.3f} of frame)")
    return 0


def _cmd_mask(args) -> int:
    config = _resolve_config(args)
    frame_id = args.id or Path(args.image).stem
    frame = load_frame(args.image, frame_id, "cli", 0)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.roi:
        roi = _load_roi_pgm(args.roi)
        grid = patchify(frame, config.patch_size)
        coverage = rg.patch_coverage(roi, grid)
        geom = rg.polar_landmarks(coverage, config.tau)
        maps = mk.compute_score_maps(frame, grid, geom, coverage, config.masking_config())
        plan = mk.sample_mask_plan(
            maps.p_joint, coverage, config.masking_config(), frame.id, fallbacks=maps.fallbacks
        )
        plan_dict = pl.plan_to_dict(plan, config.patch_size, coverage, maps.p_joint, config)
    else:
        plan_dict, maps = pl.build_mask_plan(frame, config)
    plan_path = out / f"{frame_id}{pl.PLAN_SUFFIX}"
    pl.write_plan_file(plan_path, plan_dict)
    if args.viz:
        shape = (plan_dict["grid_h"], plan_dict["grid_w"])
        pl.emit_heatmap(plan_dict["coverage"], shape, out / f"{frame_id}.coverage.png")
        pl.emit_heatmap(maps.p_polar, shape, out / f"{frame_id}.p_polar.png")
        pl.emit_heatmap(maps.p_hog, shape, out / f"{frame_id}.p_hog.png")
        pl.emit_heatmap(maps.p_joint, shape, out / f"{frame_id}.p_joint.png")
    print(
        f"mask: {len(plan_dict['visible'])} visible / {len(plan_dict['masked'])} masked / "
        f"{len(plan_dict['targets'])} targets -> {plan_path}"
    )
    return 0


def _cmd_pipeline(args) -> int:
    config = _resolve_config(args)
    manifest = pl.Manifest.load_jsonl(args.manifest)
    summary = pl.run_pipeline(manifest, config, args.out_dir)
    print(
        f"pipeline: {summary.input_count} in, {summary.retained_after_visual} after visual, "
        f"{summary.retained_after_semantic} after semantic, {summary.empty_roi_count} empty ROI"
    )
    return 0


def _cmd_verify(args) -> int:
    paths: list[Path] = []
    for target in args.paths:
        p = Path(target)
        if p.is_dir():
            paths.extend(sorted(p.glob(f"*{pl.PLAN_SUFFIX}")))
        else:
            paths.append(p)
    if not paths:
        print("verify: no plan files found", file=sys.stderr)
        return 1
    bad = 0
    for path in paths:
        try:
            problems = pl.verify_plan_dict(pl.load_plan_file(path))
        except Exception as exc:  # malformed JSON counts as a failed file
            problems = [f"unreadable: {exc}"]
        if problems:
            bad += 1
            for problem in problems:
                print(f"{path}: {problem}", file=sys.stderr)
    print(f"verify: {len(paths) - bad}/{len(paths)} plan files ok")
    return 0 if bad == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sonoprep",
        description="Ultrasound pre-training data curation and mask-plan generation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dedup", help="screen a manifest; write report + retained manifest")
    p.add_argument("manifest")
    p.add_argument("--out-dir", required=True)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_dedup)

    p = sub.add_parser("roi", help="detect the sector ROI of one frame; write a PGM mask")
    p.add_argument("image")
    p.add_argument("output")
    p.add_argument("--id")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_roi)

    p = sub.add_parser("mask", help="emit a mask plan for one frame")
    p.add_argument("image")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--id")
    p.add_argument("--roi", help="use a precomputed PGM ROI mask instead of detection")
    p.add_argument("--viz", action="store_true", help="also write score heatmaps")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_mask)

    p = sub.add_parser("pipeline", help="full run: screen, then mask plans for every survivor")
    p.add_argument("manifest")
    p.add_argument("--out-dir", required=True)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("verify", help="re-check invariants of emitted plan files")
    p.add_argument("paths", nargs="+")
    p.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ManifestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SonoprepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
