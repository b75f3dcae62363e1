"""Masked reconstruction objective.

The per-patch error is the *sum* of squared pixel differences (not a pixel
mean), averaged over the selected patch indices. The reduction runs in
float64 so the value is directly comparable against file-based reference
fixtures regardless of the model's compute dtype.
"""

from __future__ import annotations

import torch


def masked_patch_mse(
    predicted: torch.Tensor,
    original: torch.Tensor,
    indices,
    *,
    standardize: bool = False,
) -> torch.Tensor:
    """Mean over ``indices`` of per-patch squared L2 reconstruction error.

    predicted/original: (N, patch_dim). ``standardize`` normalizes each
    original patch to zero mean / unit variance before comparison.
    """
    idx = torch.as_tensor(list(indices), dtype=torch.long, device=predicted.device)
    if idx.numel() == 0:
        raise ValueError("indices must not be empty")
    pred = predicted[idx].double()
    orig = original[idx].double()
    if standardize:
        mean = orig.mean(dim=1, keepdim=True)
        std = orig.std(dim=1, unbiased=False, keepdim=True).clamp_min(1e-12)
        orig = (orig - mean) / std
    return ((pred - orig) ** 2).sum(dim=1).mean()
