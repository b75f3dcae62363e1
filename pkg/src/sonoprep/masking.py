"""Polar geometric prior, HOG texture scores, their fusion, and mask sampling.

Patch selection is driven by a joint distribution over the patch grid:

* a polar score built from normalized depth r and lateral offset theta
  relative to the detected sector (Gaussian radial band times an angular
  falloff, gated by sector coverage),
* a per-patch HOG texture score passed through a softmax,
* a convex combination of the two normalized distributions.

Visible tokens and reconstruction targets are drawn from that distribution
without replacement via Gumbel-top-k, which matches the sequential
draw-and-remove distribution and stays reproducible through one named RNG
substream per image.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DegeneratePriorError,
    InvalidInputError,
    InvalidMaskRatioError,
)
from .imaging import PatchGrid, UltrasoundFrame
from .region import HALF_WIDTH_FLOOR, CoverageGrid, PolarGeometry

logger = logging.getLogger(__name__)

HOG_BINS = 9
PROB_SUM_TOL = 1e-9

FALLBACK_DEGENERATE_PRIOR = "degenerate_polar_prior"
FALLBACK_EMPTY_TARGET_POOL = "empty_target_pool"


@dataclass(frozen=True)
class MaskingConfig:
    """Knobs of the polar/texture prior and of the sampling rule.

    ``mu`` and ``sigma`` place and widen the radially high-response band,
    ``k`` controls angular decay, ``tau`` is the coverage threshold shared
    with the landmark extraction, and ``lambda_`` blends texture (0) against
    geometry (1).
    """

    mu: float = 0.5
    sigma: float = 0.25
    k: float = 2.0
    tau: float = 0.5
    lambda_: float = 0.5
    mask_ratio: float = 0.75
    target_fraction: float = 0.5
    seed: int = 0

    def validate(self) -> "MaskingConfig":
        if not 0.0 <= self.mu <= 1.0:
            raise InvalidInputError(f"mu must be in [0, 1], got {self.mu}")
        if not self.sigma > 0.0:
            raise InvalidInputError(f"sigma must be > 0, got {self.sigma}")
        if not self.k > 0.0:
            raise InvalidInputError(f"k must be > 0, got {self.k}")
        if not 0.0 <= self.tau < 1.0:
            raise InvalidInputError(f"tau must be in [0, 1), got {self.tau}")
        if not 0.0 <= self.lambda_ <= 1.0:
            raise InvalidInputError(f"lambda must be in [0, 1], got {self.lambda_}")
        if not 0.0 < self.mask_ratio < 1.0:
            raise InvalidInputError(f"mask_ratio must be in (0, 1), got {self.mask_ratio}")
        if not 0.0 < self.target_fraction <= 1.0:
            raise InvalidInputError(
                f"target_fraction must be in (0, 1], got {self.target_fraction}"
            )
        if not 0 <= self.seed < 2**64:
            raise InvalidInputError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        return self


@dataclass(frozen=True, eq=False)
class ScoreMaps:
    """All per-patch scores and distributions for one frame."""

    r: np.ndarray
    theta: np.ndarray
    s_polar: np.ndarray
    p_polar: np.ndarray
    s_hog: np.ndarray
    p_hog: np.ndarray
    p_joint: np.ndarray
    fallbacks: tuple[str, ...] = ()


@dataclass(frozen=True)
class MaskPlan:
    """Sampling outcome for one frame: index sets plus provenance."""

    image_id: str
    grid_h: int
    grid_w: int
    visible: tuple[int, ...]
    masked: tuple[int, ...]
    targets: tuple[int, ...]
    supplemented: tuple[int, ...]
    seed: int
    fallbacks: tuple[str, ...] = ()

    @property
    def n_patches(self) -> int:
        return self.grid_h * self.grid_w


def image_rng(seed: int, image_id: str) -> np.random.Generator:
    """Named per-image RNG substream, stable across machines and runs."""
    digest = hashlib.sha256(image_id.encode("utf-8")).digest()
    words = np.frombuffer(digest, dtype="<u4").tolist()
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed] + words)))


def polar_coords(geom: PolarGeometry, patch_index: int) -> tuple[float, float]:
    """Normalized (depth, lateral offset) of one patch; both clipped."""
    n_patches = geom.grid_h * geom.grid_w
    if not 0 <= patch_index < n_patches:
        raise InvalidInputError(f"patch index {patch_index} out of range [0, {n_patches})")
    m, n = patch_index // geom.grid_w, patch_index % geom.grid_w
    depth_span = geom.m_bottom - geom.m_apex
    r = 0.0 if depth_span == 0 else float(np.clip((m - geom.m_apex) / depth_span, 0.0, 1.0))
    center = geom.n_center
    if geom.row_centers is not None:
        center = float(geom.row_centers[m])
    h = float(geom.half_width[m]) if m < geom.half_width.shape[0] else HALF_WIDTH_FLOOR
    theta = float(np.clip((n - center) / h, -1.0, 1.0))
    return r, theta


def polar_coord_arrays(geom: PolarGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized polar coordinates for every patch on the grid."""
    m = np.arange(geom.grid_h * geom.grid_w) // geom.grid_w
    n = np.arange(geom.grid_h * geom.grid_w) % geom.grid_w
    depth_span = geom.m_bottom - geom.m_apex
    if depth_span == 0:
        r = np.zeros(m.shape, dtype=np.float64)
    else:
        r = np.clip((m - geom.m_apex) / depth_span, 0.0, 1.0)
    centers = (
        geom.row_centers[m]
        if geom.row_centers is not None
        else np.full(m.shape, geom.n_center)
    )
    theta = np.clip((n - centers) / geom.half_width[m], -1.0, 1.0)
    return r.astype(np.float64), theta.astype(np.float64)


def polar_terms(r, theta, v, cfg: MaskingConfig):
    """Radial weight, angular weight, and coverage gate.

    f_r = exp(-(r - mu)^2 / (2 sigma^2)); g_theta = 1 - |theta|^k;
    q = clip((v - tau) / (1 - tau), 0, 1). Works elementwise on arrays.
    """
    r = np.asarray(r, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    f_r = np.exp(-((r - cfg.mu) ** 2) / (2.0 * cfg.sigma**2))
    g_theta = 1.0 - np.abs(theta) ** cfg.k
    q = np.clip((v - cfg.tau) / (1.0 - cfg.tau), 0.0, 1.0)
    if f_r.ndim == 0:
        return float(f_r), float(g_theta), float(q)
    return f_r, g_theta, q


def polar_distribution(
    geom: PolarGeometry, coverage: CoverageGrid, cfg: MaskingConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Gated polar score per patch and its normalized distribution.

    Raises DegeneratePriorError when every patch is gated to zero (all
    coverage <= tau); callers fall back to a uniform distribution over the
    candidate patches and record the fallback in the emitted plan.
    """
    r, theta = polar_coord_arrays(geom)
    f_r, g_theta, q = polar_terms(r, theta, coverage.v, cfg)
    s_polar = q * (f_r + g_theta)
    total = float(s_polar.sum())
    if total <= 0.0:
        raise DegeneratePriorError("all patches gated to zero (coverage <= tau everywhere)")
    return s_polar, s_polar / total


def hog_scores(frame: UltrasoundFrame, grid: PatchGrid) -> np.ndarray:
    """Per-patch texture strength from an orientation histogram.

    Central-difference gradients (replicated border), unsigned orientations
    quantized to 9 bins over [0, 180), magnitude-weighted per-patch
    histograms; the score is the histogram's L2 norm, rescaled to [0, 1] by
    the global maximum (all zeros when the frame has no gradients).
    """
    pixels = frame.pixels
    if (pixels.shape[0], pixels.shape[1]) != (grid.image_h, grid.image_w):
        raise InvalidInputError("frame shape does not match grid")
    padded = np.pad(pixels, 1, mode="edge")
    gx = padded[1:-1, 2:] - padded[1:-1, :-2]
    gy = padded[2:, 1:-1] - padded[:-2, 1:-1]
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx), np.pi)
    bins = np.minimum((ang / (np.pi / HOG_BINS)).astype(np.int64), HOG_BINS - 1)

    h, w = pixels.shape
    rows = np.arange(h) // grid.patch_size
    cols = np.arange(w) // grid.patch_size
    pid = rows[:, None] * grid.grid_w + cols[None, :]
    flat = pid * HOG_BINS + bins
    hists = np.bincount(
        flat.ravel(), weights=mag.ravel(), minlength=grid.n_patches * HOG_BINS
    ).reshape(grid.n_patches, HOG_BINS)
    scores = np.linalg.norm(hists, axis=1)
    top = float(scores.max())
    if top <= 0.0:
        return np.zeros(grid.n_patches, dtype=np.float64)
    return scores / top


def hog_distribution(s_hog) -> np.ndarray:
    """Softmax of the texture scores, computed with max-subtraction."""
    s = np.asarray(s_hog, dtype=np.float64)
    if not np.isfinite(s).all():
        raise InvalidInputError("HOG scores must be finite")
    z = np.exp(s - s.max())
    return z / z.sum()


def joint_distribution(p_hog, p_polar, lambda_: float) -> np.ndarray:
    """Convex fusion (1-lambda) * p_hog + lambda * p_polar.

    The endpoints reproduce the inputs bit-for-bit.
    """
    p_hog = np.asarray(p_hog, dtype=np.float64)
    p_polar = np.asarray(p_polar, dtype=np.float64)
    if p_hog.shape != p_polar.shape:
        raise InvalidInputError(f"distribution length mismatch: {p_hog.shape} vs {p_polar.shape}")
    if not 0.0 <= lambda_ <= 1.0:
        raise InvalidInputError(f"lambda must be in [0, 1], got {lambda_}")
    if lambda_ == 0.0:
        return p_hog.copy()
    if lambda_ == 1.0:
        return p_polar.copy()
    return (1.0 - lambda_) * p_hog + lambda_ * p_polar


def compute_score_maps(
    frame: UltrasoundFrame,
    grid: PatchGrid,
    geom: PolarGeometry,
    coverage: CoverageGrid,
    cfg: MaskingConfig,
) -> ScoreMaps:
    """Assemble every per-patch score and distribution for one frame.

    On a degenerate polar prior the geometric side falls back to uniform
    over the ROI-candidate patches (or over all patches when there are
    none), and the fallback is recorded.
    """
    r, theta = polar_coord_arrays(geom)
    fallbacks: tuple[str, ...] = ()
    try:
        s_polar, p_polar = polar_distribution(geom, coverage, cfg)
    except DegeneratePriorError:
        s_polar = np.zeros(coverage.n_patches, dtype=np.float64)
        candidates = coverage.v >= cfg.tau
        if not candidates.any():
            candidates = np.ones(coverage.n_patches, dtype=bool)
        p_polar = candidates / candidates.sum()
        fallbacks = (FALLBACK_DEGENERATE_PRIOR,)
    s_hog = hog_scores(frame, grid)
    p_hog = hog_distribution(s_hog)
    p_joint = joint_distribution(p_hog, p_polar, cfg.lambda_)
    return ScoreMaps(
        r=r,
        theta=theta,
        s_polar=s_polar,
        p_polar=p_polar,
        s_hog=s_hog,
        p_hog=p_hog,
        p_joint=p_joint,
        fallbacks=fallbacks,
    )


def sample_without_replacement(
    rng: np.random.Generator, weights: np.ndarray, pool: np.ndarray, k: int
) -> np.ndarray:
    """Draw k distinct indices from ``pool``, weighted by ``weights``.

    Gumbel-top-k over the pool's (renormalization-invariant) log-weights;
    equivalent in distribution to sequential draw-and-remove. Zero-weight
    pool entries are only used once the positive-weight pool is exhausted,
    in RNG-permuted order.
    """
    pool = np.asarray(pool, dtype=np.int64)
    if k > pool.shape[0]:
        raise InvalidInputError(f"cannot draw {k} from a pool of {pool.shape[0]}")
    if k == pool.shape[0]:
        return np.sort(pool)
    w = np.asarray(weights, dtype=np.float64)[pool]
    if (w < 0).any() or not np.isfinite(w).all():
        raise InvalidInputError("sampling weights must be finite and non-negative")
    gumbel = rng.gumbel(size=pool.shape[0])
    keys = np.where(w > 0, np.log(np.where(w > 0, w, 1.0)) + gumbel, -1e300 + gumbel)
    top = np.argpartition(keys, -k)[-k:]
    return np.sort(pool[top])


def sample_mask_plan(
    p_joint: np.ndarray,
    coverage: CoverageGrid,
    cfg: MaskingConfig,
    image_id: str,
    *,
    fallbacks: tuple[str, ...] = (),
) -> MaskPlan:
    """Sample visible tokens and reconstruction targets for one frame.

    The candidate set starts from the ROI patches (v > tau) and, when too
    small for the visible budget, is supplemented with the highest-coverage
    non-ROI patches (ties to the lower index). Remaining ROI patches feed
    the reconstruction-target draw. Identical (inputs, seed) produce an
    identical plan regardless of scheduling.
    """
    cfg.validate()
    p = np.asarray(p_joint, dtype=np.float64)
    n = p.shape[0]
    if n != coverage.n_patches:
        raise InvalidInputError(f"p_joint length {n} does not match grid ({coverage.n_patches})")
    if abs(float(p.sum()) - 1.0) > PROB_SUM_TOL or (p < 0).any():
        raise InvalidInputError("p_joint must be a probability vector")

    n_vis = int(math.floor((1.0 - cfg.mask_ratio) * n + 0.5))
    if n_vis <= 0 or n_vis >= n:
        raise InvalidMaskRatioError(
            f"mask_ratio {cfg.mask_ratio} leaves {n_vis} visible of {n} patches"
        )

    roi = np.flatnonzero(coverage.v > cfg.tau)
    supplemented: np.ndarray = np.empty(0, dtype=np.int64)
    candidates = roi
    if roi.shape[0] < n_vis:
        non_roi = np.flatnonzero(coverage.v <= cfg.tau)
        order = np.lexsort((non_roi, -coverage.v[non_roi]))
        supplemented = non_roi[order[: n_vis - roi.shape[0]]]
        candidates = np.concatenate([roi, supplemented])

    rng = image_rng(cfg.seed, image_id)
    visible = sample_without_replacement(rng, p, candidates, n_vis)
    masked = np.setdiff1d(np.arange(n, dtype=np.int64), visible, assume_unique=False)

    remaining = np.setdiff1d(np.union1d(candidates, roi), visible, assume_unique=False)
    plan_fallbacks = tuple(fallbacks)
    if remaining.shape[0] == 0:
        logger.warning("frame '%s': no remaining ROI patches, empty target set", image_id)
        targets = np.empty(0, dtype=np.int64)
        plan_fallbacks = plan_fallbacks + (FALLBACK_EMPTY_TARGET_POOL,)
    else:
        n_targets = max(1, int(math.floor(cfg.target_fraction * remaining.shape[0] + 0.5)))
        targets = sample_without_replacement(rng, p, remaining, n_targets)

    return MaskPlan(
        image_id=image_id,
        grid_h=coverage.grid_h,
        grid_w=coverage.grid_w,
        visible=tuple(int(i) for i in visible),
        masked=tuple(int(i) for i in masked),
        targets=tuple(int(i) for i in targets),
        supplemented=tuple(int(i) for i in np.sort(supplemented)),
        seed=cfg.seed,
        fallbacks=plan_fallbacks,
    )


def _patch_vector(data, index: int) -> np.ndarray:
    if isinstance(data, Mapping):
        if index not in data:
            raise InvalidInputError(f"patch {index} missing from input")
        return np.asarray(data[index], dtype=np.float64).ravel()
    arr = np.asarray(data, dtype=np.float64)
    if index >= arr.shape[0]:
        raise InvalidInputError(f"patch {index} out of range for array of {arr.shape[0]}")
    return arr[index].ravel()


def reconstruction_loss(
    predicted,
    original,
    masked_set: Sequence[int],
    *,
    standardize: bool = False,
) -> float:
    """Masked mean-squared reconstruction error.

    Averages, over the masked indices, the squared L2 distance between the
    predicted and original pixel vectors of each patch (a per-patch sum, not
    a per-pixel mean). ``standardize`` normalizes each original patch to
    zero mean / unit variance before comparison.
    """
    indices = list(masked_set)
    if not indices:
        raise InvalidInputError("masked_set must not be empty")
    total = 0.0
    for i in indices:
        pred = _patch_vector(predicted, i)
        orig = _patch_vector(original, i)
        if pred.shape != orig.shape:
            raise InvalidInputError(
                f"patch {i}: predicted length {pred.shape[0]} != original {orig.shape[0]}"
            )
        if standardize:
            std = float(orig.std())
            orig = (orig - orig.mean()) / (std if std > 1e-12 else 1.0)
        diff = pred - orig
        total += float(diff @ diff)
    return total / len(indices)
