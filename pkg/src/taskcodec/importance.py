"""Channel importance scoring.

A small gating head estimates how much each latent channel matters for the
downstream task: global average pooling followed by a two-layer bottleneck MLP
and a sigmoid.  The latent is multiplied by the resulting per-channel weights,
and the weights double as a ranking signal for channel reordering and for the
removal experiments in the probe harness.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from taskcodec.errors import ConfigurationError


class ChannelScorer(nn.Module):
    """Per-channel importance weights in (0, 1) plus the gated latent.

    With bypass=True the scorer returns all-ones weights and the latent
    untouched, which turns the surrounding codec back into its plain baseline.
    """

    def __init__(self, channels: int, reduction: int = 4, bypass: bool = False):
        super().__init__()
        if channels < 1:
            raise ConfigurationError(f"channels must be positive, got {channels}")
        hidden = max(1, channels // reduction)
        self.channels = channels
        self.bypass = bypass
        self.fc1 = nn.Linear(channels, hidden)
        self.fc2 = nn.Linear(hidden, channels)

    def score_logits(self, latent: torch.Tensor) -> torch.Tensor:
        """Pre-squash scores of shape (B, C) for a (B, C, H, W) latent.

        The squash is strictly monotone, so the logits carry the same channel
        ordering as the weights but keep a live gradient even where a weight
        sits at 0 or 1.  Training applies the order penalty here; everything
        reported or ranked uses the squashed weights.  bypass yields zeros
        (the constant profile matching the all-ones weights).
        """
        if latent.dim() != 4 or latent.shape[1] != self.channels:
            raise ConfigurationError(
                f"expected (B, {self.channels}, H, W) latent, got {tuple(latent.shape)}"
            )
        if self.bypass:
            return torch.zeros(
                latent.shape[0], self.channels, dtype=latent.dtype, device=latent.device
            )
        pooled = latent.mean(dim=(2, 3))
        return self.fc2(torch.relu(self.fc1(pooled)))

    def score(self, latent: torch.Tensor) -> torch.Tensor:
        """Weights of shape (B, C) for a (B, C, H, W) latent."""
        if self.bypass:
            if latent.dim() != 4 or latent.shape[1] != self.channels:
                raise ConfigurationError(
                    f"expected (B, {self.channels}, H, W) latent, got {tuple(latent.shape)}"
                )
            return torch.ones(
                latent.shape[0], self.channels, dtype=latent.dtype, device=latent.device
            )
        return torch.sigmoid(self.score_logits(latent))

    def forward(self, latent: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        weights = self.score(latent)
        return weights, modulate(latent, weights)


def modulate(latent: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
    """Multiply each channel by its weight; weights shape (B, C) or (C,)."""
    if weights.dim() == 1:
        weights = weights.unsqueeze(0)
    if latent.dim() != 4 or weights.shape[-1] != latent.shape[1]:
        raise ConfigurationError(
            f"weights {tuple(weights.shape)} do not match latent {tuple(latent.shape)}"
        )
    return latent * weights.unsqueeze(-1).unsqueeze(-1)


def rank_channels(weights) -> np.ndarray:
    """Channel indices sorted by descending weight; ties break toward the
    lower index so the ranking is deterministic."""
    w = np.asarray(
        weights.detach().cpu().numpy() if isinstance(weights, torch.Tensor) else weights,
        dtype=np.float64,
    )
    if w.ndim != 1:
        raise ConfigurationError(f"expected a 1-D weight vector, got shape {w.shape}")
    return np.argsort(-w, kind="stable")


def mean_weights(scorer: ChannelScorer, latents: torch.Tensor) -> torch.Tensor:
    """Dataset-level importance: W averaged over a batch of latents."""
    with torch.no_grad():
        return scorer.score(latents).mean(dim=0)


def order_violation_fraction(weights) -> float:
    """Fraction of adjacent channel pairs that are strictly increasing.

    Accepts a (C,) vector or a (B, C) batch; batches are averaged row-wise.
    A perfectly non-increasing weight profile scores 0.0.
    """
    w = np.asarray(
        weights.detach().cpu().numpy() if isinstance(weights, torch.Tensor) else weights,
        dtype=np.float64,
    )
    if w.ndim == 1:
        w = w[None, :]
    if w.ndim != 2 or w.shape[1] < 2:
        raise ConfigurationError(f"expected (C,) or (B, C) with C >= 2, got shape {w.shape}")
    violations = w[:, 1:] > w[:, :-1]
    return float(violations.mean())
