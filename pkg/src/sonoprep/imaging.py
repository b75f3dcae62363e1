"""Frame loading, grayscale normalization, resizing, and patch-grid decomposition."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import FrameReadError, InvalidInputError

# ITU-R BT.601 luma weights, applied to incidental RGB exports.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True, eq=False)
class UltrasoundFrame:
    """A grayscale frame with identity and sequence-position metadata.

    ``pixels`` is a 2-D float64 array with intensities in [0, 1].
    """

    id: str
    sequence_id: str
    frame_index: int
    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise InvalidInputError(
                f"frame '{self.id}': pixels must be a non-empty 2-D array, got shape {px.shape}"
            )
        if self.frame_index < 0:
            raise InvalidInputError(f"frame '{self.id}': frame_index must be >= 0")
        if not np.isfinite(px).all():
            raise InvalidInputError(f"frame '{self.id}': non-finite pixel values")
        lo, hi = float(px.min()), float(px.max())
        if lo < 0.0 or hi > 1.0:
            raise InvalidInputError(
                f"frame '{self.id}': intensities outside [0, 1] (min={lo}, max={hi})"
            )

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class PatchGrid:
    """Non-overlapping patch decomposition of an H x W frame.

    Edge patches may be partial; the grid stays dense so that
    ``n_patches == grid_h * grid_w`` always holds. Patch ``i`` sits at row
    ``i // grid_w``, column ``i % grid_w``.
    """

    patch_size: int
    image_h: int
    image_w: int
    grid_h: int
    grid_w: int

    @property
    def n_patches(self) -> int:
        return self.grid_h * self.grid_w

    def patch_row_col(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.n_patches:
            raise InvalidInputError(f"patch index {index} out of range [0, {self.n_patches})")
        return index // self.grid_w, index % self.grid_w

    def patch_bounds(self, index: int) -> tuple[int, int, int, int]:
        """Pixel bounds (r0, r1, c0, c1) of patch ``index``, end-exclusive."""
        m, n = self.patch_row_col(index)
        p = self.patch_size
        return (
            m * p,
            min((m + 1) * p, self.image_h),
            n * p,
            min((n + 1) * p, self.image_w),
        )

    def pixel_counts(self) -> np.ndarray:
        """|P_i| for every patch, accounting for partial edge patches."""
        p = self.patch_size
        rows = np.minimum(np.arange(1, self.grid_h + 1) * p, self.image_h) - np.arange(
            self.grid_h
        ) * p
        cols = np.minimum(np.arange(1, self.grid_w + 1) * p, self.image_w) - np.arange(
            self.grid_w
        ) * p
        return np.outer(rows, cols).ravel().astype(np.int64)


class ResizedImage(NamedTuple):
    pixels: np.ndarray
    nearest_fallback: bool


def _to_pixels(frame) -> np.ndarray:
    if isinstance(frame, UltrasoundFrame):
        return frame.pixels
    arr = np.asarray(frame, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"expected a 2-D intensity array, got shape {arr.shape}")
    return arr


def _rgb_to_luma(rgb: np.ndarray) -> np.ndarray:
    r, g, b = LUMA_WEIGHTS
    return r * rgb[..., 0] + g * rgb[..., 1] + b * rgb[..., 2]


def load_frame(path, id: str, sequence_id: str, frame_index: int) -> UltrasoundFrame:
    """Load a PNG or binary PGM frame, normalizing 8-bit intensities to [0, 1].

    RGB inputs are converted to luma with BT.601 weights; the conversion is
    done in float so e.g. pure red maps to exactly 0.299.
    """
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            if mode == "P":
                img = img.convert("RGB")
                mode = "RGB"
            elif mode == "LA":
                img = img.getchannel("L")
                mode = "L"
            elif mode == "RGBA":
                img = img.convert("RGB")
                mode = "RGB"
            arr = np.asarray(img)
    except FileNotFoundError as exc:
        raise FrameReadError(path, "no such file") from exc
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise FrameReadError(path, str(exc)) from exc

    if arr.size == 0:
        raise InvalidInputError(f"frame '{id}': image at {path} has a zero dimension")
    if arr.dtype != np.uint8:
        raise FrameReadError(path, f"unsupported bit depth {arr.dtype} (expected 8-bit)")
    if mode == "L":
        gray = arr.astype(np.float64)
    elif mode == "RGB":
        gray = _rgb_to_luma(arr.astype(np.float64))
    else:
        raise FrameReadError(path, f"unsupported image mode '{mode}' (expected 8-bit gray or RGB)")
    return UltrasoundFrame(
        id=id, sequence_id=sequence_id, frame_index=frame_index, pixels=gray / 255.0
    )


def _box_weights(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic (n_out, n_in) matrix of box-overlap weights."""
    scale = n_in / n_out
    w = np.zeros((n_out, n_in), dtype=np.float64)
    for i in range(n_out):
        lo, hi = i * scale, (i + 1) * scale
        j0, j1 = int(math.floor(lo)), int(math.ceil(hi))
        for j in range(j0, min(j1, n_in)):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                w[i, j] = overlap / scale
    return w


def resize_area(frame, out_h: int, out_w: int) -> ResizedImage:
    """Area-averaging (box) downsample to (out_h, out_w).

    When either output dimension exceeds the input, the whole resize falls
    back to nearest-neighbor and the result is flagged.
    """
    pixels = _to_pixels(frame)
    h, w = pixels.shape
    if out_h < 1 or out_w < 1:
        raise InvalidInputError(f"output dimensions must be >= 1, got ({out_h}, {out_w})")
    if out_h > h or out_w > w:
        ri = np.minimum((np.arange(out_h) + 0.5) * h / out_h, h - 1).astype(np.int64)
        ci = np.minimum((np.arange(out_w) + 0.5) * w / out_w, w - 1).astype(np.int64)
        return ResizedImage(pixels[np.ix_(ri, ci)].copy(), True)
    out = _box_weights(h, out_h) @ pixels @ _box_weights(w, out_w).T
    return ResizedImage(np.clip(out, 0.0, 1.0), False)


def patchify(frame, patch_size: int) -> PatchGrid:
    """Decompose a frame into a dense grid of P x P patches (edges partial)."""
    pixels = _to_pixels(frame)
    if patch_size < 1:
        raise InvalidInputError(f"patch_size must be >= 1, got {patch_size}")
    h, w = pixels.shape
    return PatchGrid(
        patch_size=patch_size,
        image_h=h,
        image_w=w,
        grid_h=-(-h // patch_size),
        grid_w=-(-w // patch_size),
    )
