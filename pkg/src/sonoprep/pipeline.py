"""Batch orchestration: manifest ingestion, stage wiring, reports, plan files.

Screening stages are inherently sequential (greedy state); the per-frame ROI
and masking stages run on a process pool. Every frame draws from its own RNG
substream and writes its own ``<id>.maskplan.json``, so outputs are
byte-identical for any worker count.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import dedup as dd
from . import masking as mk
from . import region as rg
from .errors import (
    ConfigError,
    EmptyRoiError,
    FrameReadError,
    InvalidInputError,
    ManifestError,
    SonoprepError,
)
from .imaging import load_frame, patchify

logger = logging.getLogger(__name__)

PLAN_SUFFIX = ".maskplan.json"

CONFIG_KEYS = {
    "threshold_vis",
    "threshold_sem",
    "embedding_file",
    "bg_threshold",
    "close_radius",
    "tau",
    "mu",
    "sigma",
    "k",
    "lambda",
    "mask_ratio",
    "target_fraction",
    "patch_size",
    "dct_size",
    "workers",
    "seed",
}


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    path: str
    sequence_id: str
    frame_index: int


@dataclass
class Manifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    def __post_init__(self):
        ids = set()
        positions = set()
        for e in self.entries:
            if e.id in ids:
                raise ManifestError(f"duplicate id '{e.id}'")
            ids.add(e.id)
            pos = (e.sequence_id, e.frame_index)
            if pos in positions:
                raise ManifestError(f"duplicate (sequence_id, frame_index) {pos}")
            positions.add(pos)
            if not e.path:
                raise ManifestError(f"entry '{e.id}' has an empty path")

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def load_jsonl(cls, path) -> "Manifest":
        entries = []
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ManifestError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
                try:
                    entries.append(
                        ManifestEntry(
                            id=str(rec["id"]),
                            path=str(rec["path"]),
                            sequence_id=str(rec["sequence_id"]),
                            frame_index=int(rec["frame_index"]),
                        )
                    )
                except (KeyError, TypeError, ValueError) as exc:
                    raise ManifestError(f"{path}:{lineno}: {exc!r}") from exc
        return cls(entries=entries)

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for e in self.entries:
                fh.write(
                    json.dumps(
                        {
                            "id": e.id,
                            "path": e.path,
                            "sequence_id": e.sequence_id,
                            "frame_index": e.frame_index,
                        }
                    )
                    + "\n"
                )


@dataclass
class PipelineConfig:
    """Every tunable constant of the pipeline, range-validated at load."""

    threshold_vis: float = 0.95
    threshold_sem: float = 0.90
    embedding_file: str | None = None
    bg_threshold: float = rg.DEFAULT_BG_THRESHOLD
    close_radius: int = rg.DEFAULT_CLOSE_RADIUS
    tau: float = 0.5
    mu: float = 0.5
    sigma: float = 0.25
    k: float = 2.0
    lambda_: float = 0.5
    mask_ratio: float = 0.75
    target_fraction: float = 0.5
    patch_size: int = 16
    dct_size: int = 64
    workers: int = 1
    seed: int = 0

    def validate(self) -> "PipelineConfig":
        try:
            self.masking_config().validate()
        except InvalidInputError as exc:
            raise ConfigError(str(exc)) from exc
        if not 0.0 < self.threshold_vis <= 1.0:
            raise ConfigError(f"threshold_vis must be in (0, 1], got {self.threshold_vis}")
        if not 0.0 < self.threshold_sem <= 1.0:
            raise ConfigError(f"threshold_sem must be in (0, 1], got {self.threshold_sem}")
        if not 0.0 < self.bg_threshold < 1.0:
            raise ConfigError(f"bg_threshold must be in (0, 1), got {self.bg_threshold}")
        if self.close_radius < 0:
            raise ConfigError(f"close_radius must be >= 0, got {self.close_radius}")
        if self.patch_size < 1:
            raise ConfigError(f"patch_size must be >= 1, got {self.patch_size}")
        if self.dct_size < 8:
            raise ConfigError(f"dct_size must be >= 8, got {self.dct_size}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        return self

    def masking_config(self) -> mk.MaskingConfig:
        return mk.MaskingConfig(
            mu=self.mu,
            sigma=self.sigma,
            k=self.k,
            tau=self.tau,
            lambda_=self.lambda_,
            mask_ratio=self.mask_ratio,
            target_fraction=self.target_fraction,
            seed=self.seed,
        )

    def to_dict(self) -> dict:
        return {
            "threshold_vis": self.threshold_vis,
            "threshold_sem": self.threshold_sem,
            "embedding_file": self.embedding_file,
            "bg_threshold": self.bg_threshold,
            "close_radius": self.close_radius,
            "tau": self.tau,
            "mu": self.mu,
            "sigma": self.sigma,
            "k": self.k,
            "lambda": self.lambda_,
            "mask_ratio": self.mask_ratio,
            "target_fraction": self.target_fraction,
            "patch_size": self.patch_size,
            "dct_size": self.dct_size,
            "workers": self.workers,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        unknown = set(data) - CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "lambda" in kwargs:
            kwargs["lambda_"] = kwargs.pop("lambda")
        try:
            cfg = cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg.validate()

    @classmethod
    def load_json(cls, path) -> "PipelineConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)


@dataclass
class PipelineSummary:
    input_count: int = 0
    retained_after_visual: int = 0
    retained_after_semantic: int = 0
    empty_roi_count: int = 0
    elapsed_per_stage: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "input_count": self.input_count,
            "retained_after_visual": self.retained_after_visual,
            "retained_after_semantic": self.retained_after_semantic,
            "empty_roi_count": self.empty_roi_count,
            "elapsed_per_stage": self.elapsed_per_stage,
        }


def dump_json(obj) -> str:
    """Deterministic JSON with floats at 9 significant digits."""
    parts: list[str] = []
    _dump(obj, parts)
    return "".join(parts)


def _dump(obj, parts: list[str]) -> None:
    if obj is None:
        parts.append("null")
    elif obj is True:
        parts.append("true")
    elif obj is False:
        parts.append("false")
    elif isinstance(obj, (int, np.integer)):
        parts.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        if not np.isfinite(obj):
            raise InvalidInputError(f"cannot serialize non-finite float {obj}")
        parts.append(format(float(obj), ".9g"))
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    elif isinstance(obj, dict):
        parts.append("{")
        for i, (key, val) in enumerate(obj.items()):
            if i:
                parts.append(", ")
            parts.append(json.dumps(str(key)))
            parts.append(": ")
            _dump(val, parts)
        parts.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        parts.append("[")
        for i, val in enumerate(obj):
            if i:
                parts.append(", ")
            _dump(val, parts)
        parts.append("]")
    else:
        raise InvalidInputError(f"cannot serialize {type(obj).__name__}")


def plan_to_dict(
    plan: mk.MaskPlan,
    patch_size: int,
    coverage: rg.CoverageGrid,
    p_joint: np.ndarray,
    config: PipelineConfig,
) -> dict:
    # worker count is execution plumbing, not plan content; keeping it out
    # preserves byte-identical plans across worker counts
    cfg = config.to_dict()
    cfg.pop("workers")
    return {
        "image_id": plan.image_id,
        "grid_h": plan.grid_h,
        "grid_w": plan.grid_w,
        "patch_size": patch_size,
        "visible": list(plan.visible),
        "masked": list(plan.masked),
        "targets": list(plan.targets),
        "supplemented": list(plan.supplemented),
        "coverage": [float(x) for x in coverage.v],
        "p_joint": [float(x) for x in p_joint],
        "fallbacks": list(plan.fallbacks),
        "config": cfg,
        "seed": plan.seed,
    }


def write_plan_file(path, plan_dict: dict) -> None:
    with open(path, "w") as fh:
        fh.write(dump_json(plan_dict))
        fh.write("\n")


def load_plan_file(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def emit_heatmap(values, grid_shape: tuple[int, int], path) -> None:
    """Write per-patch values as a grid_h x grid_w grayscale PNG.

    Pixels are max-normalized (not sum-normalized) for visual contrast; an
    all-zero input produces an all-black image.
    """
    vals = np.asarray(values, dtype=np.float64)
    if not np.isfinite(vals).all():
        raise InvalidInputError("heatmap values must be finite")
    gh, gw = grid_shape
    if vals.shape[0] != gh * gw:
        raise InvalidInputError(f"expected {gh * gw} values, got {vals.shape[0]}")
    top = float(vals.max())
    if top <= 0.0:
        img = np.zeros((gh, gw), dtype=np.uint8)
    else:
        img = np.rint(255.0 * vals / top).astype(np.uint8).reshape(gh, gw)
    Image.fromarray(img, mode="L").save(path, format="PNG")


def build_mask_plan(frame, config: PipelineConfig):
    """ROI -> coverage -> landmarks -> distributions -> plan, for one frame.

    Returns (plan_dict, score_maps). Raises EmptyRoiError when the frame has
    no detectable imaging region.
    """
    roi = rg.detect_roi(frame, config.bg_threshold, config.close_radius)
    grid = patchify(frame, config.patch_size)
    coverage = rg.patch_coverage(roi, grid)
    geom = rg.polar_landmarks(coverage, config.tau)
    maps = mk.compute_score_maps(frame, grid, geom, coverage, config.masking_config())
    plan = mk.sample_mask_plan(
        maps.p_joint, coverage, config.masking_config(), frame.id, fallbacks=maps.fallbacks
    )
    return plan_to_dict(plan, config.patch_size, coverage, maps.p_joint, config), maps


def _mask_worker(args) -> tuple[str, str, str]:
    """Process one retained frame; returns (id, status, message)."""
    entry_id, path, sequence_id, frame_index, config_dict, out_dir = args
    config = PipelineConfig.from_dict(config_dict)
    try:
        frame = load_frame(path, entry_id, sequence_id, frame_index)
        plan_dict, _ = build_mask_plan(frame, config)
    except EmptyRoiError as exc:
        return entry_id, "empty_roi", str(exc)
    except SonoprepError as exc:
        return entry_id, "error", str(exc)
    write_plan_file(Path(out_dir) / f"{entry_id}{PLAN_SUFFIX}", plan_dict)
    return entry_id, "ok", ""


@dataclass
class ScreeningResult:
    report: dd.DedupReport
    retained_entries: list[ManifestEntry]
    errors: list[dict]
    retained_after_visual: int
    timings: dict


def run_screening(manifest: Manifest, config: PipelineConfig) -> ScreeningResult:
    """Load frames and run both screening stages.

    Frame-level load failures are recorded and skipped, never fatal.
    """
    errors: list[dict] = []
    frames = {}
    t0 = time.perf_counter()
    for e in manifest.entries:
        try:
            frames[e.id] = load_frame(e.path, e.id, e.sequence_id, e.frame_index)
        except (FrameReadError, InvalidInputError) as exc:
            errors.append({"id": e.id, "stage": "load", "error": str(exc)})
    t_load = time.perf_counter() - t0

    by_sequence: dict[str, list] = {}
    for e in manifest.entries:
        if e.id in frames:
            by_sequence.setdefault(e.sequence_id, []).append(frames[e.id])
    for seq in by_sequence.values():
        seq.sort(key=lambda f: f.frame_index)

    t0 = time.perf_counter()
    entry_by_id: dict[str, dd.DedupEntry] = {}
    visual_retained: list[str] = []
    for seq_id in sorted(by_sequence):
        retained, entries = dd.visual_screen(
            by_sequence[seq_id], config.threshold_vis, dct_size=config.dct_size
        )
        visual_retained.extend(retained)
        for entry in entries:
            entry_by_id[entry.id] = entry
    t_visual = time.perf_counter() - t0

    t0 = time.perf_counter()
    if config.embedding_file:
        table = dd.load_embeddings(config.embedding_file)
        missing = [i for i in visual_retained if i not in table]
        if missing:
            raise ConfigError(
                f"embedding file '{config.embedding_file}' lacks ids: {missing[:5]}"
                + ("..." if len(missing) > 5 else "")
            )
        candidates = [(i, table[i]) for i in visual_retained]
    else:
        candidates = [(i, dd.stub_embedding(frames[i], size=config.dct_size)) for i in visual_retained]
    sem_retained, sem_entries = dd.semantic_screen(candidates, config.threshold_sem)
    for entry in sem_entries:
        entry_by_id[entry.id] = entry
    t_semantic = time.perf_counter() - t0

    report = dd.DedupReport(
        entries=[entry_by_id[e.id] for e in manifest.entries if e.id in entry_by_id],
        threshold_vis=config.threshold_vis,
        threshold_sem=config.threshold_sem,
    )
    retained_set = set(sem_retained)
    retained_entries = [e for e in manifest.entries if e.id in retained_set]
    return ScreeningResult(
        report=report,
        retained_entries=retained_entries,
        errors=errors,
        retained_after_visual=len(visual_retained),
        timings={"load": t_load, "visual": t_visual, "semantic": t_semantic},
    )


def run_pipeline(manifest: Manifest, config: PipelineConfig, output_dir) -> PipelineSummary:
    """Screen the corpus, then emit one mask plan per retained frame.

    Writes ``dedup_report.csv``, ``<id>.maskplan.json`` files,
    ``errors.json``, and ``summary.json`` into ``output_dir``. Frame-level
    failures (unreadable file, empty ROI) are logged and skipped.
    """
    config.validate()
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)

    screening = run_screening(manifest, config)
    errors = screening.errors
    timings = dict(screening.timings)

    t0 = time.perf_counter()
    jobs = [
        (e.id, e.path, e.sequence_id, e.frame_index, config.to_dict(), str(out))
        for e in screening.retained_entries
    ]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_mask_worker, jobs, chunksize=8))
    else:
        results = [_mask_worker(job) for job in jobs]
    empty_roi = 0
    for frame_id, status, message in results:
        if status == "empty_roi":
            empty_roi += 1
            errors.append({"id": frame_id, "stage": "roi", "error": message})
        elif status == "error":
            errors.append({"id": frame_id, "stage": "mask", "error": message})
    timings["mask"] = time.perf_counter() - t0

    screening.report.write_csv(out / "dedup_report.csv")
    errors.sort(key=lambda r: r["id"])
    with open(out / "errors.json", "w") as fh:
        json.dump(errors, fh, indent=1)
        fh.write("\n")
    summary = PipelineSummary(
        input_count=len(manifest),
        retained_after_visual=screening.retained_after_visual,
        retained_after_semantic=len(screening.retained_entries),
        empty_roi_count=empty_roi,
        elapsed_per_stage={k: round(v, 6) for k, v in timings.items()},
    )
    with open(out / "summary.json", "w") as fh:
        fh.write(dump_json(summary.to_dict()))
        fh.write("\n")
    logger.info(
        "pipeline: %d in, %d after visual, %d after semantic, %d empty ROI",
        summary.input_count,
        summary.retained_after_visual,
        summary.retained_after_semantic,
        summary.empty_roi_count,
    )
    return summary


def verify_plan_dict(plan: dict) -> list[str]:
    """Invariant check of one parsed plan file; returns a list of problems."""
    problems: list[str] = []
    required = {
        "image_id",
        "grid_h",
        "grid_w",
        "patch_size",
        "visible",
        "masked",
        "targets",
        "supplemented",
        "coverage",
        "p_joint",
        "config",
        "seed",
    }
    missing = required - set(plan)
    if missing:
        return [f"missing keys: {sorted(missing)}"]
    n = plan["grid_h"] * plan["grid_w"]
    visible = plan["visible"]
    masked = plan["masked"]
    targets = plan["targets"]
    for name, arr in (("visible", visible), ("masked", masked), ("targets", targets)):
        if arr != sorted(set(arr)):
            problems.append(f"{name} is not a sorted duplicate-free list")
        if any(not 0 <= i < n for i in arr):
            problems.append(f"{name} contains out-of-range indices")
    if set(visible) & set(masked):
        problems.append("visible and masked overlap")
    if set(visible) | set(masked) != set(range(n)):
        problems.append("visible and masked do not partition the grid")
    if not set(targets) <= set(masked):
        problems.append("targets are not a subset of masked")
    if len(plan["coverage"]) != n or len(plan["p_joint"]) != n:
        problems.append("coverage/p_joint length does not match the grid")
    if any(not 0.0 <= v <= 1.0 for v in plan["coverage"]):
        problems.append("coverage values outside [0, 1]")
    psum = sum(plan["p_joint"])
    if abs(psum - 1.0) > 1e-6 or any(v < 0 for v in plan["p_joint"]):
        problems.append(f"p_joint is not a probability vector (sum {psum})")
    cfg = plan["config"]
    if "mask_ratio" in cfg:
        expect = int(np.floor((1.0 - cfg["mask_ratio"]) * n + 0.5))
        if len(visible) != expect:
            problems.append(f"|visible| = {len(visible)}, expected {expect}")
    return problems
