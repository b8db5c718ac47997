"""Group-sequential entropy model with a checkerboard spatial pass.

Groups are coded in order.  Group 0 is predicted from the hyper branch alone;
every later group is additionally predicted from the groups already decoded
(restored to the unscaled domain), so the big cheap tail groups ride on the
information already spent on the small important ones.  Within each group a
checkerboard splits positions into anchors, coded from the channel/hyper
context only, and non-anchors, whose prediction also sees the decoded anchor
neighbourhood through a small masked convolution.

Strict causality is structural: the channel context for group i reads only
groups 0..i-1, anchor parameters never read any group-i value, and non-anchor
parameters read only group-i anchors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import torch
from torch import nn

from taskcodec.entropy import (
    bits_from_likelihood,
    gaussian_window_likelihood,
    quantize,
    softplus_scale,
    ste_round,
)
from taskcodec.errors import ConfigurationError, SequencingError
from taskcodec.grouping import GroupSpec, split_groups

ANCHOR = "anchor"
NONANCHOR = "nonanchor"


@dataclass
class EntropyParams:
    """Per-element Gaussian window parameters for one group."""

    mean: torch.Tensor
    scale: torch.Tensor


@dataclass
class RateReport:
    """Bit accounting for one coded batch."""

    group_bits: list[float]
    group_elements: list[int]
    hyper_bits: float
    batch: int
    image_hw: tuple[int, int]

    @property
    def total_bits(self) -> float:
        return float(sum(self.group_bits) + self.hyper_bits)

    @property
    def bpp(self) -> float:
        h, w = self.image_hw
        return self.total_bits / float(self.batch * h * w)

    def lines(self, spec: GroupSpec) -> list[str]:
        out = []
        for i, (bits, elems) in enumerate(zip(self.group_bits, self.group_elements)):
            out.append(
                f"group {i}: size {spec.sizes[i]}  scale {spec.scales[i]:.6g}  "
                f"bits {bits:.1f}  bits/elem {bits / max(elems, 1):.4f}"
            )
        out.append(f"hyper: bits {self.hyper_bits:.1f}")
        out.append(f"total: bits {self.total_bits:.1f}  bpp {self.bpp:.6f}")
        return out


def checkerboard_masks(
    h: int, w: int, device, dtype
) -> tuple[torch.Tensor, torch.Tensor]:
    """(anchor, non-anchor) 0/1 masks of shape (1, 1, h, w); a position is an
    anchor when (row + col) is even."""
    rows = torch.arange(h, device=device).view(-1, 1)
    cols = torch.arange(w, device=device).view(1, -1)
    anchor = ((rows + cols) % 2 == 0).to(dtype).view(1, 1, h, w)
    return anchor, 1.0 - anchor


# A visitor receives (group index, phase, params) and returns a full-size map
# whose positions for that phase hold the quantized values; all other
# positions are ignored (the driver masks them out).
Visitor = Callable[[int, str, EntropyParams], torch.Tensor]


class GroupedEntropyModel(nn.Module):
    """Entropy parameters and quantization for grouped, scaled latents.

    The module is built for a fixed group-size layout; the per-group scales
    live in the GroupSpec passed to each call, so scale sweeps never need a
    rebuild.  The hyper side information gets a learned per-channel Gaussian
    density of its own.
    """

    def __init__(self, sizes: tuple[int, ...], hyper_channels: int):
        super().__init__()
        if any(s <= 0 for s in sizes):
            raise ConfigurationError(f"group sizes must be positive, got {sizes}")
        self.sizes = tuple(int(s) for s in sizes)
        self.hyper_channels = hyper_channels

        offsets, acc = [], 0
        for s in self.sizes:
            offsets.append(acc)
            acc += s
        self.offsets = tuple(offsets)
        self.latent_channels = acc

        def ctx_net(in_ch: int, out_ch: int) -> nn.Sequential:
            hidden = max(16, min(96, 2 * in_ch))
            return nn.Sequential(
                nn.Conv2d(in_ch, hidden, 3, padding=1),
                nn.ReLU(inplace=True),
                nn.Conv2d(hidden, out_ch, 3, padding=1),
            )

        # channel_ctx[i - 1] serves group i (group 0 has no prefix)
        self.channel_ctx = nn.ModuleList(
            ctx_net(self.offsets[i], 2 * self.sizes[i]) for i in range(1, len(self.sizes))
        )
        self.spatial_ctx = nn.ModuleList(
            nn.Conv2d(s, 2 * s, 5, padding=2) for s in self.sizes
        )
        self.fusion = nn.ModuleList(
            nn.Sequential(
                nn.Conv2d(6 * s, 4 * s, 1),
                nn.ReLU(inplace=True),
                nn.Conv2d(4 * s, 2 * s, 1),
            )
            for s in self.sizes
        )

        self.hyper_mean = nn.Parameter(torch.zeros(hyper_channels))
        self.hyper_raw_scale = nn.Parameter(torch.zeros(hyper_channels))

    # ---- hyper side ----------------------------------------------------

    def hyper_params(self) -> tuple[torch.Tensor, torch.Tensor]:
        return self.hyper_mean, softplus_scale(self.hyper_raw_scale)

    def _hyper_mean_map(self, z: torch.Tensor) -> torch.Tensor:
        return self.hyper_mean.view(1, -1, 1, 1).to(z.dtype).expand_as(z)

    def hyper_quantize(
        self,
        z: torch.Tensor,
        mode: str,
        noise: torch.Tensor | None = None,
        generator: torch.Generator | None = None,
    ) -> torch.Tensor:
        return quantize(z, mode, mean=self._hyper_mean_map(z), noise=noise, generator=generator)

    def hyper_likelihood(self, z_hat: torch.Tensor) -> torch.Tensor:
        mean, scale = self.hyper_params()
        return gaussian_window_likelihood(
            z_hat, mean.view(1, -1, 1, 1).to(z_hat.dtype), scale.view(1, -1, 1, 1).to(z_hat.dtype)
        )

    # ---- per-group parameter paths --------------------------------------

    def base_slices(self, base: torch.Tensor, i: int) -> tuple[torch.Tensor, torch.Tensor]:
        """Slice the hyper-decoded (mean, raw scale) maps for group i."""
        c = self.latent_channels
        if base.shape[1] != 2 * c:
            raise ConfigurationError(
                f"base maps must have {2 * c} channels, got {base.shape[1]}"
            )
        lo, size = self.offsets[i], self.sizes[i]
        return base[:, lo:lo + size], base[:, c + lo:c + lo + size]

    def channel_context(self, i: int, prefix_restored: torch.Tensor | None) -> torch.Tensor | None:
        """Context features for group i from the decoded groups before it.

        prefix_restored concatenates groups 0..i-1 in the unscaled domain.
        Group 0 has no prefix and gets None (the fusion treats it as zeros).
        """
        if i == 0:
            if prefix_restored is not None and prefix_restored.shape[1] != 0:
                raise SequencingError("group 0 takes no prefix")
            return None
        if prefix_restored is None or prefix_restored.shape[1] != self.offsets[i]:
            have = 0 if prefix_restored is None else prefix_restored.shape[1]
            raise SequencingError(
                f"group {i} needs the {self.offsets[i]} channels of groups 0..{i - 1} "
                f"decoded first, got {have}"
            )
        return self.channel_ctx[i - 1](prefix_restored)

    def fused_params(
        self,
        i: int,
        base_mean: torch.Tensor,
        base_raw: torch.Tensor,
        ch_feat: torch.Tensor | None,
        sp_feat: torch.Tensor | None,
    ) -> EntropyParams:
        size = self.sizes[i]
        b, _, h, w = base_mean.shape
        zeros = base_mean.new_zeros(b, 2 * size, h, w)
        pieces = [
            base_mean,
            base_raw,
            ch_feat if ch_feat is not None else zeros,
            sp_feat if sp_feat is not None else zeros,
        ]
        out = self.fusion[i](torch.cat(pieces, dim=1))
        mean, raw = out.chunk(2, dim=1)
        return EntropyParams(mean, softplus_scale(raw))

    # ---- sequential driver ----------------------------------------------

    def run_groups(
        self, base: torch.Tensor, spec: GroupSpec, visitor: Visitor
    ) -> tuple[list[torch.Tensor], list[EntropyParams]]:
        """Walk the groups in coding order, asking the visitor for quantized
        values one checkerboard phase at a time.

        Returns the per-group quantized blocks (scaled domain) and the
        per-element entropy parameters assembled from both phases.
        """
        if tuple(spec.sizes) != self.sizes:
            raise ConfigurationError(
                f"group spec sizes {spec.sizes} do not match the model layout {self.sizes}"
            )
        b, _, h, w = base.shape
        amask, nmask = checkerboard_masks(h, w, base.device, base.dtype)

        blocks: list[torch.Tensor] = []
        params_out: list[EntropyParams] = []
        prefix_restored: torch.Tensor | None = None
        for i in range(len(self.sizes)):
            base_mean, base_raw = self.base_slices(base, i)
            ch = self.channel_context(i, prefix_restored)

            p_anchor = self.fused_params(i, base_mean, base_raw, ch, None)
            anchors = visitor(i, ANCHOR, p_anchor) * amask
            sp = self.spatial_ctx[i](anchors)
            p_non = self.fused_params(i, base_mean, base_raw, ch, sp)
            non = visitor(i, NONANCHOR, p_non) * nmask

            block = anchors + non
            params = EntropyParams(
                p_anchor.mean * amask + p_non.mean * nmask,
                p_anchor.scale * amask + p_non.scale * nmask,
            )
            blocks.append(block)
            params_out.append(params)

            restored = block * spec.scales[i]
            prefix_restored = (
                restored if prefix_restored is None
                else torch.cat([prefix_restored, restored], dim=1)
            )
        return blocks, params_out

    # ---- whole-latent entry points ---------------------------------------

    def sequential_eval(
        self, scaled: torch.Tensor, base: torch.Tensor, spec: GroupSpec
    ) -> tuple[list[torch.Tensor], list[EntropyParams], list[torch.Tensor]]:
        """Eval-mode pass: mean-centered rounding per phase, exactly what a
        real decoder reproduces.  Returns blocks, params, per-group bits."""
        true_blocks = split_groups(scaled, spec)

        def visit(i: int, phase: str, params: EntropyParams) -> torch.Tensor:
            return quantize(true_blocks[i], "eval", mean=params.mean)

        blocks, params = self.run_groups(base, spec, visit)
        bits = [
            bits_from_likelihood(gaussian_window_likelihood(bl, pr.mean, pr.scale))
            for bl, pr in zip(blocks, params)
        ]
        return blocks, params, bits

    def sequential_train(
        self,
        scaled: torch.Tensor,
        base: torch.Tensor,
        spec: GroupSpec,
        noise: dict[int, torch.Tensor] | None = None,
        generator: torch.Generator | None = None,
        values: str = "ste",
    ) -> tuple[list[torch.Tensor], list[torch.Tensor]]:
        """Train-mode pass.

        The rate term always evaluates the likelihood of noise-quantized
        values.  With values="ste" (the default) the values that feed the
        spatial context, later groups and the decoder use straight-through
        rounding, so the magnitudes the rest of the network sees match eval
        mode; the straight-through gradient is deliberately not the local
        derivative.  values="noisy" feeds the same noisy values everywhere
        instead — a fully differentiable relaxation whose autograd is exact,
        which gradient diagnostics need.  Returns the value blocks and the
        per-group likelihoods of the noisy values.
        """
        if values not in ("ste", "noisy"):
            raise ConfigurationError(f"values must be 'ste' or 'noisy', got {values!r}")
        true_blocks = split_groups(scaled, spec)
        group_noise: dict[int, torch.Tensor] = {}

        def noisy_block(i: int) -> torch.Tensor:
            if i not in group_noise:
                fixed = None if noise is None else noise.get(i)
                if fixed is None:
                    bl = true_blocks[i]
                    fixed = torch.rand(bl.shape, dtype=bl.dtype, device=bl.device,
                                       generator=generator) - 0.5
                group_noise[i] = fixed
            return true_blocks[i] + group_noise[i]

        def visit(i: int, phase: str, params: EntropyParams) -> torch.Tensor:
            if values == "ste":
                return ste_round(true_blocks[i], mean=params.mean)
            return noisy_block(i)

        blocks, params = self.run_groups(base, spec, visit)
        likelihoods = [
            gaussian_window_likelihood(noisy_block(i), pr.mean, pr.scale)
            for i, pr in enumerate(params)
        ]
        return blocks, likelihoods
