"""A deliberately small masked autoencoder over flattened pixel patches.

The encoder sees only the visible tokens named by a mask plan; the decoder
rebuilds the full token sequence with a learned mask token and predicts raw
pixels per patch. Positional information comes from fixed 2-D sin-cos
embeddings shared (by value) between encoder and decoder.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn


def sincos_pos_embed(embed_dim: int, grid_h: int, grid_w: int) -> torch.Tensor:
    """Fixed 2-D sin-cos positional embeddings, shape (grid_h * grid_w, dim)."""
    assert embed_dim % 4 == 0, "embed_dim must be divisible by 4"
    half = embed_dim // 2

    def axis_embed(positions: np.ndarray) -> np.ndarray:
        omega = 1.0 / 10000 ** (np.arange(half // 2, dtype=np.float64) / (half // 2))
        angles = np.outer(positions, omega)
        return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)

    rows = np.repeat(np.arange(grid_h), grid_w)
    cols = np.tile(np.arange(grid_w), grid_h)
    emb = np.concatenate([axis_embed(rows), axis_embed(cols)], axis=1)
    return torch.from_numpy(emb).float()


def _blocks(embed_dim: int, heads: int, depth: int) -> nn.TransformerEncoder:
    layer = nn.TransformerEncoderLayer(
        d_model=embed_dim,
        nhead=heads,
        dim_feedforward=embed_dim * 4,
        dropout=0.0,
        activation="gelu",
        batch_first=True,
        norm_first=True,
    )
    return nn.TransformerEncoder(layer, num_layers=depth, enable_nested_tensor=False)


class TinyMae(nn.Module):
    def __init__(
        self,
        grid_h: int,
        grid_w: int,
        patch_size: int,
        embed_dim: int = 64,
        encoder_depth: int = 2,
        decoder_depth: int = 1,
        heads: int = 4,
    ):
        super().__init__()
        patch_dim = patch_size * patch_size
        self.grid_h, self.grid_w = grid_h, grid_w
        self.patch_embed = nn.Linear(patch_dim, embed_dim)
        self.register_buffer("pos_embed", sincos_pos_embed(embed_dim, grid_h, grid_w))
        self.encoder = _blocks(embed_dim, heads, encoder_depth)
        self.encoder_norm = nn.LayerNorm(embed_dim)
        self.mask_token = nn.Parameter(torch.zeros(embed_dim))
        self.decoder = _blocks(embed_dim, heads, decoder_depth)
        self.decoder_norm = nn.LayerNorm(embed_dim)
        self.head = nn.Linear(embed_dim, patch_dim)
        nn.init.normal_(self.mask_token, std=0.02)

    def encode(self, patches: torch.Tensor, visible: torch.Tensor) -> torch.Tensor:
        """Encode only the visible tokens. patches: (N, P*P); visible: (V,)."""
        tokens = self.patch_embed(patches[visible]) + self.pos_embed[visible]
        return self.encoder_norm(self.encoder(tokens.unsqueeze(0))).squeeze(0)

    def forward(self, patches: torch.Tensor, visible: torch.Tensor) -> torch.Tensor:
        """Predict pixels for every patch; callers select the target rows."""
        encoded = self.encode(patches, visible)
        n = self.grid_h * self.grid_w
        full = self.mask_token.expand(n, -1).clone()
        full = full.index_copy(0, visible, encoded)
        full = full + self.pos_embed
        decoded = self.decoder_norm(self.decoder(full.unsqueeze(0))).squeeze(0)
        return self.head(decoded)
