"""Loading of mask-plan files and their images into training samples.

A plan directory is expected to hold ``<id>.maskplan.json`` files next to the
``<id>.png`` / ``<id>.pgm`` frames they describe (the batch pipeline's output
directory works directly when frames are copied or generated alongside).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

logger = logging.getLogger(__name__)

PLAN_SUFFIX = ".maskplan.json"
IMAGE_SUFFIXES = (".png", ".pgm")


class MalformedPlanError(Exception):
    """A plan file is not valid JSON or lacks required keys."""


class GridMismatchError(Exception):
    """A plan's grid shape disagrees with its image dimensions."""


@dataclass(frozen=True)
class PlanRecord:
    image_id: str
    grid_h: int
    grid_w: int
    patch_size: int
    visible: tuple[int, ...]
    masked: tuple[int, ...]
    targets: tuple[int, ...]

    @property
    def n_patches(self) -> int:
        return self.grid_h * self.grid_w


@dataclass(frozen=True, eq=False)
class Sample:
    """One training example: the frame cut into patch vectors plus its plan."""

    plan: PlanRecord
    patches: np.ndarray  # (N, patch_size**2) float32 in [0, 1]


def image_to_patches(pixels: np.ndarray, patch_size: int) -> np.ndarray:
    """Row-major patch decomposition into flattened (N, P*P) vectors."""
    h, w = pixels.shape
    gh, gw = h // patch_size, w // patch_size
    return (
        pixels.reshape(gh, patch_size, gw, patch_size)
        .transpose(0, 2, 1, 3)
        .reshape(gh * gw, patch_size * patch_size)
    )


def patches_to_image(patches: np.ndarray, grid_h: int, grid_w: int, patch_size: int) -> np.ndarray:
    """Inverse of image_to_patches, for inspection."""
    return (
        patches.reshape(grid_h, grid_w, patch_size, patch_size)
        .transpose(0, 2, 1, 3)
        .reshape(grid_h * patch_size, grid_w * patch_size)
    )


def _parse_plan(path: Path) -> PlanRecord:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedPlanError(f"{path}: invalid JSON ({exc})") from exc
    try:
        return PlanRecord(
            image_id=str(raw["image_id"]),
            grid_h=int(raw["grid_h"]),
            grid_w=int(raw["grid_w"]),
            patch_size=int(raw["patch_size"]),
            visible=tuple(int(i) for i in raw["visible"]),
            masked=tuple(int(i) for i in raw["masked"]),
            targets=tuple(int(i) for i in raw["targets"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedPlanError(f"{path}: missing or malformed field ({exc!r})") from exc


def _find_image(directory: Path, image_id: str) -> Path | None:
    for suffix in IMAGE_SUFFIXES:
        candidate = directory / f"{image_id}{suffix}"
        if candidate.exists():
            return candidate
    return None


def load_image(path) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"), dtype=np.float32)
    return arr / 255.0


def load_plans(directory) -> list[Sample]:
    """Load every validated (frame, plan) pair from a directory.

    Plans whose image is missing are skipped with a warning; plans whose grid
    shape disagrees with the image dimensions (or whose image does not divide
    evenly into patches) are rejected with GridMismatchError.
    """
    directory = Path(directory)
    samples: list[Sample] = []
    for plan_path in sorted(directory.glob(f"*{PLAN_SUFFIX}")):
        plan = _parse_plan(plan_path)
        image_path = _find_image(directory, plan.image_id)
        if image_path is None:
            logger.warning("no image for plan %s; skipping", plan_path.name)
            continue
        pixels = load_image(image_path)
        h, w = pixels.shape
        p = plan.patch_size
        if h % p or w % p or (h // p, w // p) != (plan.grid_h, plan.grid_w):
            raise GridMismatchError(
                f"{plan_path.name}: grid {plan.grid_h}x{plan.grid_w} (patch {p}) "
                f"does not match image {h}x{w}"
            )
        samples.append(Sample(plan=plan, patches=image_to_patches(pixels, p)))
    return samples
