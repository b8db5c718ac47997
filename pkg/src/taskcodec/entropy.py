"""Quantization and discrete Gaussian likelihood primitives.

Rate estimates treat a quantized value as the probability mass of a unit-wide
window under a Gaussian: p = F((x - mu + 1/2) / sigma) - F((x - mu - 1/2) / sigma).
The mass is floored at 2^-16, which caps any element at 16 bits and matches
the 16-bit frequency resolution of the range coder.
"""

from __future__ import annotations

import math

import torch

from taskcodec.errors import ConfigurationError

LIKELIHOOD_FLOOR = 2.0 ** -16
# Predicted scales are softplus outputs raised to at least this value.
SCALE_FLOOR = 1e-6
# ... and capped at this value.  An unbounded scale lets the rate model call
# any magnitude cheap (bits grow only logarithmically while quantization
# error shrinks linearly), so training inflates latents without limit; a
# ceiling makes amplitude cost real bits, and bounded scales are what a
# finite entropy-coding table can represent anyway.
SCALE_CEIL = 64.0


def quantize(
    x: torch.Tensor,
    mode: str,
    mean: torch.Tensor | None = None,
    noise: torch.Tensor | None = None,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """Additive uniform noise in train mode, mean-centered rounding in eval.

    Eval mode rounds the offset from the predicted mean so the coded symbol is
    an integer and the mean is restored exactly: round(x - mean) + mean.
    A fixed noise tensor can be supplied for reproducible train-mode runs.
    """
    if mode == "train":
        if noise is None:
            noise = torch.rand(x.shape, dtype=x.dtype, device=x.device, generator=generator) - 0.5
        return x + noise
    if mode == "eval":
        if mean is None:
            return torch.round(x)
        return torch.round(x - mean) + mean
    raise ConfigurationError(f"unknown quantization mode {mode!r}; use 'train' or 'eval'")


def ste_round(x: torch.Tensor, mean: torch.Tensor | None = None) -> torch.Tensor:
    """Mean-centered rounding with a straight-through gradient."""
    if mean is None:
        return x + (torch.round(x) - x).detach()
    centered = x - mean
    return centered + (torch.round(centered) - centered).detach() + mean


def _standardized_cdf(x: torch.Tensor) -> torch.Tensor:
    return 0.5 * torch.erfc(-x * (2 ** -0.5))


class _FlooredLikelihood(torch.autograd.Function):
    """clamp(min=2^-16) whose backward lets gradients pull a clamped value
    back above the floor.

    A plain clamp zeroes every gradient once the window mass falls below the
    floor, which deadlocks training: values that drift outside the prior's
    support stop receiving rate gradient, and the prior's own parameters stop
    widening to cover them.  Passing only the gradients that point back into
    the feasible region removes the deadlock without changing the forward
    value, so rate estimates and coding are untouched.
    """

    @staticmethod
    def forward(ctx, x: torch.Tensor) -> torch.Tensor:
        ctx.save_for_backward(x)
        return x.clamp(min=LIKELIHOOD_FLOOR)

    @staticmethod
    def backward(ctx, grad: torch.Tensor) -> torch.Tensor:
        (x,) = ctx.saved_tensors
        # Below the floor, keep only gradients that increase the likelihood
        # (loss is -log2(p), so those have negative sign).
        keep = (x >= LIKELIHOOD_FLOOR) | (grad < 0)
        return grad * keep.to(grad.dtype)


def gaussian_window_likelihood(
    x: torch.Tensor, mean: torch.Tensor, scale: torch.Tensor
) -> torch.Tensor:
    """Probability mass of the unit window around x, floored at 2^-16."""
    scale = scale.clamp_min(SCALE_FLOOR)
    centered = x - mean
    upper = _standardized_cdf((centered + 0.5) / scale)
    lower = _standardized_cdf((centered - 0.5) / scale)
    return _FlooredLikelihood.apply((upper - lower).clamp(max=1.0))


def bits_from_likelihood(likelihood: torch.Tensor) -> torch.Tensor:
    """Total information content in bits."""
    return -torch.log2(likelihood).sum()


def softplus_scale(raw: torch.Tensor) -> torch.Tensor:
    """Map an unconstrained net output to a scale in [SCALE_FLOOR, SCALE_CEIL]."""
    return (torch.nn.functional.softplus(raw) + SCALE_FLOOR).clamp(max=SCALE_CEIL)


__all__ = [
    "LIKELIHOOD_FLOOR",
    "SCALE_FLOOR",
    "SCALE_CEIL",
    "quantize",
    "ste_round",
    "gaussian_window_likelihood",
    "bits_from_likelihood",
    "softplus_scale",
]
