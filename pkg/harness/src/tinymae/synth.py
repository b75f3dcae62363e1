"""Synthetic sector-frame generator, so no clinical data is ever required."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image


def render_fan(
    height: int,
    width: int,
    rng: np.random.Generator,
    apex_row: float | None = None,
    apex_col: float | None = None,
    opening_deg: float | None = None,
    r_min: float | None = None,
    r_max: float | None = None,
    speckle_sigma: float = 0.05,
) -> np.ndarray:
    """Render one fan frame: speckled tissue inside, digital black outside.

    Unspecified geometry parameters are drawn from sensible ranges. A faint
    smooth intensity gradient stands in for depth-dependent echo structure so
    frames are not statistically flat.
    """
    apex_row = float(rng.uniform(0, height * 0.08)) if apex_row is None else apex_row
    apex_col = float(rng.uniform(width * 0.35, width * 0.65)) if apex_col is None else apex_col
    opening_deg = float(rng.uniform(50, 85)) if opening_deg is None else opening_deg
    r_min = float(rng.uniform(4, height * 0.12)) if r_min is None else r_min
    r_max = float(rng.uniform(height * 0.7, height - 4)) if r_max is None else r_max

    rows, cols = np.mgrid[0:height, 0:width]
    dy = rows - apex_row
    dx = cols - apex_col
    dist = np.sqrt(dy * dy + dx * dx)
    angle = np.degrees(np.arctan2(dx, dy))
    member = (dist >= r_min) & (dist <= r_max) & (np.abs(angle) <= opening_deg / 2)

    depth = np.clip((dist - r_min) / max(r_max - r_min, 1.0), 0, 1)
    base = 0.55 - 0.2 * depth + 0.1 * np.sin(depth * 9.0 + rng.uniform(0, 6.28))
    tissue = base * (1.0 + speckle_sigma * rng.standard_normal((height, width)))
    img = np.where(member, np.clip(tissue, 0.08, 1.0), 0.0)
    return img.astype(np.float64)


def write_corpus(directory, count: int, size: int = 128, seed: int = 0) -> Path:
    """Write ``count`` fan PNGs plus a manifest; returns the manifest path.

    Each frame gets its own sequence so screening never merges two frames.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    manifest_path = directory / "manifest.jsonl"
    with open(manifest_path, "w") as fh:
        for i in range(count):
            img = render_fan(size, size, rng)
            frame_id = f"fan_{i:04d}"
            path = directory / f"{frame_id}.png"
            Image.fromarray(np.rint(img * 255).astype(np.uint8), mode="L").save(path)
            fh.write(
                json.dumps(
                    {
                        "id": frame_id,
                        "path": str(path),
                        "sequence_id": f"seq_{i:04d}",
                        "frame_index": 0,
                    }
                )
                + "\n"
            )
    return manifest_path


def write_constant_corpus(directory, count: int, size: int = 64, level: float = 0.6) -> Path:
    """Write constant-intensity frames (trivially learnable targets)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest_path = directory / "manifest.jsonl"
    img = np.full((size, size), level)
    with open(manifest_path, "w") as fh:
        for i in range(count):
            frame_id = f"const_{i:04d}"
            path = directory / f"{frame_id}.png"
            Image.fromarray(np.rint(img * 255).astype(np.uint8), mode="L").save(path)
            fh.write(
                json.dumps(
                    {
                        "id": frame_id,
                        "path": str(path),
                        "sequence_id": f"seq_{i:04d}",
                        "frame_index": 0,
                    }
                )
                + "\n"
            )
    return manifest_path
