"""Training loop: Adam over the masked reconstruction objective."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np
import torch

from .loss import masked_patch_mse
from .model import TinyMae
from .plans import Sample

logger = logging.getLogger(__name__)


@dataclass
class TinyMaeConfig:
    embed_dim: int = 64
    encoder_depth: int = 2
    decoder_depth: int = 1
    heads: int = 4
    patch_size: int = 16
    steps: int = 200
    lr: float = 2e-3
    batch_size: int = 8
    seed: int = 0
    cosine_lr: bool = True
    reconstruct_all_masked: bool = False
    standardize_targets: bool = False


def build_model(cfg: TinyMaeConfig, grid_h: int, grid_w: int) -> TinyMae:
    torch.manual_seed(cfg.seed)
    return TinyMae(
        grid_h=grid_h,
        grid_w=grid_w,
        patch_size=cfg.patch_size,
        embed_dim=cfg.embed_dim,
        encoder_depth=cfg.encoder_depth,
        decoder_depth=cfg.decoder_depth,
        heads=cfg.heads,
    )


def _validate_dataset(dataset: list[Sample], cfg: TinyMaeConfig) -> tuple[int, int]:
    if not dataset:
        raise ValueError("dataset must not be empty")
    sizes = {s.plan.patch_size for s in dataset}
    if sizes != {cfg.patch_size}:
        raise ValueError(f"plan patch sizes {sorted(sizes)} do not match config {cfg.patch_size}")
    grids = {(s.plan.grid_h, s.plan.grid_w) for s in dataset}
    if len(grids) != 1:
        raise ValueError(f"mixed grid shapes in dataset: {sorted(grids)}")
    return grids.pop()


def sample_loss(model: TinyMae, sample: Sample, cfg: TinyMaeConfig) -> torch.Tensor | None:
    """Forward one sample and return its loss (None when it has no targets)."""
    plan = sample.plan
    indices = plan.masked if cfg.reconstruct_all_masked else plan.targets
    if not indices:
        return None
    patches = torch.from_numpy(sample.patches)
    visible = torch.as_tensor(plan.visible, dtype=torch.long)
    pred = model(patches, visible)
    return masked_patch_mse(pred, patches, indices, standardize=cfg.standardize_targets)


def train(dataset: list[Sample], cfg: TinyMaeConfig) -> list[float]:
    """Run ``cfg.steps`` optimizer steps; returns the per-step loss trace."""
    grid_h, grid_w = _validate_dataset(dataset, cfg)
    usable = [s for s in dataset if s.plan.targets or cfg.reconstruct_all_masked]
    skipped = len(dataset) - len(usable)
    if skipped:
        logger.warning("skipping %d samples with empty target sets", skipped)
    if not usable:
        raise ValueError("no sample has a non-empty target set")

    model = build_model(cfg, grid_h, grid_w)
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    picker = np.random.default_rng(cfg.seed)

    trace: list[float] = []
    for step in range(cfg.steps):
        if cfg.cosine_lr:
            scale = 0.5 * (1.0 + math.cos(math.pi * step / cfg.steps))
            for group in optimizer.param_groups:
                group["lr"] = cfg.lr * scale
        batch_idx = picker.integers(0, len(usable), size=min(cfg.batch_size, len(usable)))
        losses = []
        for i in batch_idx:
            loss = sample_loss(model, usable[int(i)], cfg)
            if loss is not None:
                losses.append(loss)
        step_loss = torch.stack(losses).mean()
        if not torch.isfinite(step_loss):
            raise RuntimeError(
                f"non-finite loss {step_loss.item()} at step {step} (lr={cfg.lr}, seed={cfg.seed})"
            )
        optimizer.zero_grad()
        step_loss.backward()
        optimizer.step()
        trace.append(float(step_loss.item()))
    return trace


def write_trace_csv(path, trace: list[float]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        for step, loss in enumerate(trace):
            writer.writerow([step, f"{loss:.8f}"])
