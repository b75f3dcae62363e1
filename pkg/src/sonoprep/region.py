"""Acoustic sector ROI detection, per-patch coverage, and polar landmarks.

Ultrasound backgrounds are near-zero digital black, so the effective imaging
region is recovered by intensity thresholding followed by morphological
cleanup: closing bridges speckle dropouts, the largest 4-connected component
isolates the sector, and hole filling removes interior gaps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyRoiError, InvalidInputError
from .imaging import PatchGrid, UltrasoundFrame

DEFAULT_BG_THRESHOLD = 10 / 255
DEFAULT_CLOSE_RADIUS = 5
HALF_WIDTH_FLOOR = 0.5  # prevents division blow-up on single-patch rows

FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True, eq=False)
class RoiMask:
    """Binary sector-membership mask, same H x W as the source frame."""

    mask: np.ndarray  # uint8, values in {0, 1}

    @property
    def pixel_count(self) -> int:
        return int(self.mask.sum())

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    def write_pgm(self, path) -> None:
        """Export as a binary (P5) PGM with values 0/255 for inspection."""
        h, w = self.mask.shape
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fh.write((self.mask.astype(np.uint8) * 255).tobytes())


@dataclass(frozen=True, eq=False)
class CoverageGrid:
    """Per-patch sector coverage ratios on the patch grid.

    ``counts`` keeps the exact integer in-mask pixel count per patch so that
    coverage conservation can be checked without float error.
    """

    v: np.ndarray  # (N,) float64 in [0, 1]
    counts: np.ndarray  # (N,) int64 in-mask pixels per patch
    patch_pixels: np.ndarray  # (N,) int64 |P_i|
    grid_h: int
    grid_w: int

    @property
    def n_patches(self) -> int:
        return self.grid_h * self.grid_w


@dataclass(frozen=True, eq=False)
class PolarGeometry:
    """Sector landmarks on the patch grid.

    ``half_width[m]`` holds the per-row ROI half-width, floored at
    ``HALF_WIDTH_FLOOR``; rows with no ROI patch carry the floor value.
    ``row_centers`` is only populated when per-row centerlines were requested.
    """

    m_apex: int
    m_bottom: int
    n_center: float
    half_width: np.ndarray  # (grid_h,) float64
    roi_rows: frozenset[int]
    grid_h: int
    grid_w: int
    row_centers: np.ndarray | None = None


def disk_element(radius: int) -> np.ndarray:
    """Boolean disc structuring element of the given radius."""
    if radius < 0:
        raise InvalidInputError(f"close_radius must be >= 0, got {radius}")
    if radius == 0:
        return np.ones((1, 1), dtype=bool)
    yy, xx = np.mgrid[-radius : radius + 1, -radius : radius + 1]
    return (yy * yy + xx * xx) <= radius * radius


def _largest_component(binary: np.ndarray) -> np.ndarray:
    labels, n = ndimage.label(binary, structure=FOUR_CONNECTED)
    if n == 0:
        return np.zeros_like(binary, dtype=bool)
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    return labels == int(np.argmax(sizes))


def detect_roi(
    frame: UltrasoundFrame,
    bg_threshold: float = DEFAULT_BG_THRESHOLD,
    close_radius: int = DEFAULT_CLOSE_RADIUS,
) -> RoiMask:
    """Detect the effective imaging region of a frame.

    Raises EmptyRoiError when no pixel exceeds the background threshold; the
    caller is expected to exclude such frames from masking.
    """
    if not 0.0 < bg_threshold < 1.0:
        raise InvalidInputError(f"bg_threshold must be in (0, 1), got {bg_threshold}")
    fg = frame.pixels > bg_threshold
    if not fg.any():
        raise EmptyRoiError(f"frame '{frame.id}': no pixel above background threshold")
    if close_radius > 0:
        # Edge-replicating pad so closing does not erode regions that touch
        # the image border.
        pad = close_radius
        padded = np.pad(fg, pad, mode="edge")
        closed = ndimage.binary_closing(padded, structure=disk_element(close_radius))
        fg = closed[pad:-pad, pad:-pad]
    component = _largest_component(fg)
    filled = ndimage.binary_fill_holes(component)
    return RoiMask(mask=filled.astype(np.uint8))


def patch_coverage(roi: RoiMask, grid: PatchGrid) -> CoverageGrid:
    """Per-patch coverage ratios v_i = |P_i ∩ sector| / |P_i|.

    Counting is exact integer arithmetic; the single division happens last.
    """
    h, w = roi.shape
    if (h, w) != (grid.image_h, grid.image_w):
        raise InvalidInputError(
            f"mask shape {(h, w)} does not match grid frame {(grid.image_h, grid.image_w)}"
        )
    p = grid.patch_size
    padded = np.zeros((grid.grid_h * p, grid.grid_w * p), dtype=np.int64)
    padded[:h, :w] = roi.mask
    counts = (
        padded.reshape(grid.grid_h, p, grid.grid_w, p).sum(axis=(1, 3)).ravel().astype(np.int64)
    )
    sizes = grid.pixel_counts()
    return CoverageGrid(
        v=counts / sizes,
        counts=counts,
        patch_pixels=sizes,
        grid_h=grid.grid_h,
        grid_w=grid.grid_w,
    )


def polar_landmarks(
    coverage: CoverageGrid,
    tau: float = 0.5,
    *,
    per_row_center: bool = False,
) -> PolarGeometry:
    """Extract sector landmarks from the thresholded coverage grid.

    Patches with v_i >= tau count as ROI; landmarks are taken from the
    largest 4-connected patch component so the geometry always references a
    single connected region. The centerline is the mean of per-row midpoints
    (a robust reading of "centerline" for ragged sector edges); per-row
    midpoints are kept when ``per_row_center`` is set.
    """
    if not 0.0 <= tau < 1.0:
        raise InvalidInputError(f"tau must be in [0, 1), got {tau}")
    roi = (coverage.v >= tau).reshape(coverage.grid_h, coverage.grid_w)
    if not roi.any():
        raise EmptyRoiError(f"no patch with coverage >= {tau}")
    component = _largest_component(roi)

    rows = np.flatnonzero(component.any(axis=1))
    m_apex, m_bottom = int(rows[0]), int(rows[-1])
    half_width = np.full(coverage.grid_h, HALF_WIDTH_FLOOR, dtype=np.float64)
    row_centers = np.full(coverage.grid_h, np.nan, dtype=np.float64)
    midpoints = []
    for m in rows:
        cols = np.flatnonzero(component[m])
        n_left, n_right = int(cols[0]), int(cols[-1])
        half_width[m] = max(HALF_WIDTH_FLOOR, (n_right - n_left) / 2.0)
        mid = (n_left + n_right) / 2.0
        midpoints.append(mid)
        row_centers[m] = mid
    n_center = float(np.mean(midpoints))
    if per_row_center:
        row_centers[np.isnan(row_centers)] = n_center
    return PolarGeometry(
        m_apex=m_apex,
        m_bottom=m_bottom,
        n_center=n_center,
        half_width=half_width,
        roi_rows=frozenset(int(m) for m in rows),
        grid_h=coverage.grid_h,
        grid_w=coverage.grid_w,
        row_centers=row_centers if per_row_center else None,
    )
