"""Shared helpers for the demo scripts: a tiny fan renderer and output dir."""

from pathlib import Path

import numpy as np

OUTPUT_DIR = Path(__file__).parent / "output"


def ensure_output_dir() -> Path:
    OUTPUT_DIR.mkdir(exist_ok=True)
    return OUTPUT_DIR


def render_fan(size=224, apex_col=None, opening_deg=70.0, seed=0):
    """Speckled sector on digital-black background, apex near the top edge."""
    rng = np.random.default_rng(seed)
    apex_col = size / 2 if apex_col is None else apex_col
    rows, cols = np.mgrid[0:size, 0:size]
    dy = rows - 4.0
    dx = cols - apex_col
    dist = np.hypot(dy, dx)
    angle = np.degrees(np.arctan2(dx, dy))
    member = (dist >= 16) & (dist <= size - 16) & (np.abs(angle) <= opening_deg / 2)
    depth = np.clip((dist - 16) / (size - 32), 0, 1)
    tissue = (0.55 - 0.2 * depth) * (1 + 0.08 * rng.standard_normal((size, size)))
    tissue += 0.25 * np.exp(-((rows - size * 0.55) ** 2 + (cols - apex_col - 20) ** 2) / 400)
    return np.where(member, np.clip(tissue, 0.08, 1.0), 0.0)
