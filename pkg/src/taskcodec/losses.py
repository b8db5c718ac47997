"""Training objectives.

The distortion term is a feature-domain MSE against a frozen task network's
mid-level activations; the rate term is bits per pixel for both the latent and
the hyper side information.  Channel-order penalties push importance weights
(and the encoder-side adapter gates) toward a non-increasing channel layout so
the grouped entropy model's early groups really do hold the important
channels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from taskcodec.errors import ConfigurationError


@dataclass
class LossWeights:
    """lam multiplies the rate; phi_adapters weights each encoder-site gate's
    order penalty (uniform across sites); phi_channels weights the importance
    scorer's order penalty."""

    lam: float = 1.0
    phi_adapters: float = 0.1
    phi_channels: float = 0.3

    def to_dict(self) -> dict:
        return {
            "lam": self.lam,
            "phi_adapters": self.phi_adapters,
            "phi_channels": self.phi_channels,
        }

    @staticmethod
    def from_dict(d: dict) -> "LossWeights":
        return LossWeights(
            float(d["lam"]), float(d["phi_adapters"]), float(d["phi_channels"])
        )


def channel_order_loss(weights: torch.Tensor) -> torch.Tensor:
    """Penalty for every adjacent pair that increases: sum of max(0, w_i - w_{i-1}).

    Zero exactly when the sequence is non-increasing.  The subgradient at
    equal neighbours is 0, so plateaus are left alone.  2-D input is treated
    as a batch of sequences and averaged.
    """
    if weights.dim() == 1:
        weights = weights.unsqueeze(0)
    if weights.dim() != 2 or weights.shape[-1] < 1:
        raise ConfigurationError(
            f"expected a weight vector or batch of them, got shape {tuple(weights.shape)}"
        )
    if weights.shape[-1] == 1:
        return weights.new_zeros(())
    rises = torch.relu(weights[:, 1:] - weights[:, :-1])
    return rises.sum(dim=1).mean()


def basic_loss(
    feat_ref: torch.Tensor,
    feat_hat: torch.Tensor,
    bpp_latent: torch.Tensor,
    bpp_hyper: torch.Tensor,
    weights: LossWeights,
) -> tuple[torch.Tensor, dict[str, float]]:
    """Feature-MSE distortion plus lam-weighted rate in bits per pixel."""
    if feat_ref.shape != feat_hat.shape:
        raise ConfigurationError(
            f"feature shapes differ: {tuple(feat_ref.shape)} vs {tuple(feat_hat.shape)}"
        )
    mse = torch.nn.functional.mse_loss(feat_hat, feat_ref)
    rate = bpp_latent + bpp_hyper
    loss = mse + weights.lam * rate
    parts = {
        "mse": float(mse.detach()),
        "bpp_latent": float(bpp_latent.detach()),
        "bpp_hyper": float(bpp_hyper.detach()),
        "rate_term": float((weights.lam * rate).detach()),
    }
    return loss, parts


def total_loss(
    feat_ref: torch.Tensor,
    feat_hat: torch.Tensor,
    bpp_latent: torch.Tensor,
    bpp_hyper: torch.Tensor,
    channel_weights: torch.Tensor,
    encoder_gammas: dict[str, torch.Tensor],
    weights: LossWeights,
) -> tuple[torch.Tensor, dict[str, float]]:
    """basic_loss plus the order penalties on the importance weights and on
    each encoder-side adapter gate."""
    loss, parts = basic_loss(feat_ref, feat_hat, bpp_latent, bpp_hyper, weights)

    order_ch = channel_order_loss(channel_weights)
    loss = loss + weights.phi_channels * order_ch
    parts["order_channels"] = float(order_ch.detach())

    order_sites = 0.0
    for site in sorted(encoder_gammas):
        site_loss = channel_order_loss(encoder_gammas[site])
        loss = loss + weights.phi_adapters * site_loss
        order_sites += float(site_loss.detach())
    parts["order_adapters"] = order_sites
    parts["total"] = float(loss.detach())
    return loss, parts
