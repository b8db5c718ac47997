"""Uneven channel grouping with per-group quantization scales.

Latent channels are split into a few groups of increasing size and each group
is divided by its own scale before quantization, so the scale acts as an
effective quantization step: early (important) groups keep fine steps while
the large tail group is quantized so coarsely that it costs almost nothing to
code.  An optional channel permutation lets a codec whose channels are not yet
emitted in importance order still pack the important ones into the early
groups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch

from taskcodec.errors import ConfigurationError

# Reference layout at 48 channels; other widths scale proportionally.
BASE_CHANNELS = 48
BASE_PROPORTIONS = (1, 1, 2, 4)

# Per-group scales found by sweeping each axis and fitting a quadratic:
# unit steps for the two leading groups, mild coarsening in the middle,
# and an effectively-discarding step for the tail group.
DEFAULT_SCALES = (1.0, 1.85, 2.27, 3.71, 10 ** 4.38)


@dataclass(frozen=True)
class GroupSpec:
    """Channel partition and per-group scales for a latent with sum(sizes) channels.

    permutation is the channel order applied before grouping: output channel j
    reads input channel permutation[j].  None means identity.
    """

    sizes: tuple[int, ...]
    scales: tuple[float, ...]
    permutation: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if len(self.sizes) == 0:
            raise ConfigurationError("GroupSpec needs at least one group")
        if len(self.sizes) != len(self.scales):
            raise ConfigurationError(
                f"sizes ({len(self.sizes)}) and scales ({len(self.scales)}) differ in length"
            )
        if any(s <= 0 for s in self.sizes):
            raise ConfigurationError(f"group sizes must be positive, got {self.sizes}")
        if self.scales[0] != 1.0:
            raise ConfigurationError(f"the first group scale must be 1, got {self.scales[0]}")
        for prev, cur in zip(self.scales, self.scales[1:]):
            if cur < 1.0:
                raise ConfigurationError(f"scales must be >= 1, got {cur}")
            if prev > cur:
                raise ConfigurationError(
                    f"scales must be non-decreasing, got {prev} before {cur}"
                )
        if self.permutation is not None:
            if sorted(self.permutation) != list(range(self.channels)):
                raise ConfigurationError(
                    "permutation must be a bijection over channel indices"
                )

    @property
    def n_groups(self) -> int:
        return len(self.sizes)

    @property
    def channels(self) -> int:
        return int(sum(self.sizes))

    @property
    def offsets(self) -> tuple[int, ...]:
        """Start channel of each group in the permuted layout."""
        out, acc = [], 0
        for size in self.sizes:
            out.append(acc)
            acc += size
        return tuple(out)

    def with_scale(self, index: int, value: float) -> "GroupSpec":
        scales = list(self.scales)
        scales[index] = float(value)
        return GroupSpec(self.sizes, tuple(scales), self.permutation)

    def with_permutation(self, permutation: tuple[int, ...] | None) -> "GroupSpec":
        return GroupSpec(self.sizes, self.scales, permutation)

    def to_dict(self) -> dict:
        return {
            "sizes": list(self.sizes),
            "scales": list(self.scales),
            "permutation": None if self.permutation is None else list(self.permutation),
        }

    @staticmethod
    def from_dict(data: dict) -> "GroupSpec":
        perm = data.get("permutation")
        return GroupSpec(
            tuple(int(s) for s in data["sizes"]),
            tuple(float(s) for s in data["scales"]),
            None if perm is None else tuple(int(p) for p in perm),
        )


def default_group_spec(channels: int) -> GroupSpec:
    """Five groups sized proportionally to the 48-channel reference layout.

    The four leading groups get max(1, round(C * p / 48)) channels each and the
    tail group takes the remainder, so [1, 1, 2, 4, 40] at 48 channels and
    [4, 4, 8, 16, 160] at 192.
    """
    n_lead = len(BASE_PROPORTIONS)
    if channels < n_lead + 1:
        raise ConfigurationError(
            f"need at least {n_lead + 1} channels for {n_lead + 1} groups, got {channels}"
        )
    sizes = [
        max(1, int(math.floor(channels * p / BASE_CHANNELS + 0.5)))
        for p in BASE_PROPORTIONS
    ]
    tail = channels - sum(sizes)
    if tail < 1:
        raise ConfigurationError(f"{channels} channels leave no room for the tail group")
    sizes.append(tail)
    return GroupSpec(tuple(sizes), DEFAULT_SCALES)


def _check_channels(x: torch.Tensor, spec: GroupSpec) -> None:
    if x.dim() < 3:
        raise ConfigurationError(f"expected (..., C, H, W) tensor, got shape {tuple(x.shape)}")
    if x.shape[-3] != spec.channels:
        raise ConfigurationError(
            f"latent has {x.shape[-3]} channels but the group spec covers {spec.channels}"
        )


def scale_vector(spec: GroupSpec, dtype: torch.dtype = torch.float32,
                 device: torch.device | str = "cpu") -> torch.Tensor:
    """Per-channel scale in the permuted layout, shape (C,)."""
    out = torch.empty(spec.channels, dtype=dtype, device=device)
    for size, scale, offset in zip(spec.sizes, spec.scales, spec.offsets):
        out[offset:offset + size] = scale
    return out


def group_and_scale(latent: torch.Tensor, spec: GroupSpec) -> torch.Tensor:
    """Permute channels into group order and divide each group by its scale."""
    _check_channels(latent, spec)
    if spec.permutation is not None:
        perm = torch.as_tensor(spec.permutation, dtype=torch.long, device=latent.device)
        latent = latent.index_select(-3, perm)
    sv = scale_vector(spec, latent.dtype, latent.device)
    return latent / sv.view(-1, 1, 1)


def ungroup_and_rescale(scaled: torch.Tensor, spec: GroupSpec) -> torch.Tensor:
    """Exact inverse of group_and_scale up to floating-point division error."""
    _check_channels(scaled, spec)
    sv = scale_vector(spec, scaled.dtype, scaled.device)
    latent = scaled * sv.view(-1, 1, 1)
    if spec.permutation is not None:
        perm = torch.as_tensor(spec.permutation, dtype=torch.long, device=latent.device)
        inverse = torch.argsort(perm)
        latent = latent.index_select(-3, inverse)
    return latent


def split_groups(scaled: torch.Tensor, spec: GroupSpec) -> list[torch.Tensor]:
    """Views of each group's channels in the permuted, scaled layout."""
    _check_channels(scaled, spec)
    return list(torch.split(scaled, list(spec.sizes), dim=-3))
