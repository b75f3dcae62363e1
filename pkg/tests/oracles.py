"""Independent reference implementations used to freeze expected test values.

Everything here is deliberately written from the defining formulas (plain
loops, direct sums) and never calls into the package's computation paths.
"""

import math

import numpy as np


def dct2_direct(image: np.ndarray, max_u: int, max_v: int) -> np.ndarray:
    """Orthonormal 2-D DCT-II coefficients (u < max_u, v < max_v) by direct sum.

    X[u, v] = a(u) a(v) sum_{x, y} I[x, y] cos(pi (2x+1) u / (2H)) cos(pi (2y+1) v / (2W))
    with a(0) = sqrt(1/N) and a(u>0) = sqrt(2/N) per axis.
    """
    h, w = image.shape
    out = np.zeros((max_u, max_v))
    for u in range(max_u):
        au = math.sqrt(1.0 / h) if u == 0 else math.sqrt(2.0 / h)
        cu = np.cos(np.pi * (2 * np.arange(h) + 1) * u / (2 * h))
        for v in range(max_v):
            av = math.sqrt(1.0 / w) if v == 0 else math.sqrt(2.0 / w)
            cv = np.cos(np.pi * (2 * np.arange(w) + 1) * v / (2 * w))
            out[u, v] = au * av * float(cu @ image @ cv)
    return out


def box_average_direct(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Box-average downsample for integer-divisible shapes, by explicit loops."""
    h, w = image.shape
    assert h % out_h == 0 and w % out_w == 0
    bh, bw = h // out_h, w // out_w
    out = np.zeros((out_h, out_w))
    for i in range(out_h):
        for j in range(out_w):
            block = image[i * bh : (i + 1) * bh, j * bw : (j + 1) * bw]
            out[i, j] = block.sum() / (bh * bw)
    return out


def fan_membership(
    height: int,
    width: int,
    apex_row: float,
    apex_col: float,
    opening_deg: float,
    r_min: float,
    r_max: float,
) -> np.ndarray:
    """Analytic sector membership mask: annulus slice around a downward axis."""
    rows, cols = np.mgrid[0:height, 0:width]
    dy = rows - apex_row
    dx = cols - apex_col
    dist = np.sqrt(dy * dy + dx * dx)
    angle = np.degrees(np.arctan2(dx, dy))  # 0 along +row (downward) axis
    half = opening_deg / 2.0
    return (dist >= r_min) & (dist <= r_max) & (np.abs(angle) <= half)


def render_fan(
    height: int,
    width: int,
    apex_row: float,
    apex_col: float,
    opening_deg: float,
    r_min: float,
    r_max: float,
    rng: np.random.Generator,
    speckle_sigma: float = 0.05,
    dropout_fraction: float = 0.05,
):
    """Render a synthetic sector frame and return (image, analytic mask).

    Tissue is a mid-gray field with multiplicative speckle; a fraction of
    in-sector pixels drops to near-black (to exercise closing/hole filling).
    Outside the sector is exact digital black.
    """
    member = fan_membership(height, width, apex_row, apex_col, opening_deg, r_min, r_max)
    img = np.zeros((height, width))
    speckle = 0.55 * (1.0 + speckle_sigma * rng.standard_normal(member.sum()))
    img[member] = np.clip(speckle, 0.1, 1.0)
    if dropout_fraction > 0:
        flat = np.flatnonzero(member)
        drop = rng.choice(flat, size=int(dropout_fraction * flat.size), replace=False)
        img[np.unravel_index(drop, img.shape)] = 0.02
    return img, member


def iou(a: np.ndarray, b: np.ndarray) -> float:
    a = a.astype(bool)
    b = b.astype(bool)
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def hog_patch_histogram_direct(pixels: np.ndarray, r0: int, r1: int, c0: int, c1: int) -> np.ndarray:
    """9-bin unsigned orientation histogram of one patch, by per-pixel loops.

    Gradients are central differences on the full image with a replicated
    border, matching the documented descriptor definition.
    """
    h, w = pixels.shape
    hist = np.zeros(9)
    for r in range(r0, r1):
        for c in range(c0, c1):
            left = pixels[r, max(c - 1, 0)]
            right = pixels[r, min(c + 1, w - 1)]
            up = pixels[max(r - 1, 0), c]
            down = pixels[min(r + 1, h - 1), c]
            gx = right - left
            gy = down - up
            mag = math.hypot(gx, gy)
            ang = math.atan2(gy, gx) % math.pi
            b = min(int(ang / (math.pi / 9)), 8)
            hist[b] += mag
    return hist


def polar_scores_direct(
    grid_h: int,
    grid_w: int,
    v: np.ndarray,
    m_apex: int,
    m_bottom: int,
    n_center: float,
    half_width: np.ndarray,
    mu: float,
    sigma: float,
    k: float,
    tau: float,
):
    """Per-patch polar scores straight from the defining formulas, by loops."""
    n_patches = grid_h * grid_w
    s = np.zeros(n_patches)
    for i in range(n_patches):
        m, n = divmod(i, grid_w)
        span = m_bottom - m_apex
        r = 0.0 if span == 0 else min(max((m - m_apex) / span, 0.0), 1.0)
        theta = min(max((n - n_center) / half_width[m], -1.0), 1.0)
        f_r = math.exp(-((r - mu) ** 2) / (2 * sigma**2))
        g_t = 1.0 - abs(theta) ** k
        q = min(max((v[i] - tau) / (1 - tau), 0.0), 1.0)
        s[i] = q * (f_r + g_t)
    total = s.sum()
    return s, (s / total if total > 0 else None)
