"""Task-specific adapter bank.

The codec carries a few lightweight channel-attention blocks at fixed sites in
the encoder and decoder.  Each downstream task owns its own copy of the block
parameters at every site; exactly one task's blocks are active in a forward
pass, so tuning a new task touches nothing the existing tasks use.
"""

from __future__ import annotations

import copy

import torch
from torch import nn

from taskcodec.errors import ConfigurationError


class ChannelAttentionBlock(nn.Module):
    """Gates a feature map with per-channel attention.

    Average- and max-pooled descriptors pass through one shared two-layer MLP
    and their sum is squashed to (0, 1); the feature map is scaled channelwise
    by the result.
    """

    def __init__(self, channels: int, reduction: int = 4):
        super().__init__()
        hidden = max(1, channels // reduction)
        self.channels = channels
        self.mlp = nn.Sequential(
            nn.Linear(channels, hidden),
            nn.ReLU(inplace=True),
            nn.Linear(hidden, channels),
        )

    def forward(self, feat: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if feat.dim() != 4 or feat.shape[1] != self.channels:
            raise ConfigurationError(
                f"expected (B, {self.channels}, H, W) features, got {tuple(feat.shape)}"
            )
        avg = feat.mean(dim=(2, 3))
        mx = feat.amax(dim=(2, 3))
        gamma = torch.sigmoid(self.mlp(avg) + self.mlp(mx))
        return gamma, feat * gamma.unsqueeze(-1).unsqueeze(-1)


class TaskAdapterBank(nn.Module):
    """One ChannelAttentionBlock per (site, task).

    Site names beginning with "enc" sit in the encoder; their gate vectors are
    the ones a channel-order penalty applies to during training.
    """

    def __init__(self, site_channels: dict[str, int], reduction: int = 4):
        super().__init__()
        if not site_channels:
            raise ConfigurationError("adapter bank needs at least one site")
        self.site_channels = dict(site_channels)
        self.reduction = reduction
        self.blocks = nn.ModuleDict(
            {site: nn.ModuleDict() for site in self.site_channels}
        )

    @property
    def sites(self) -> list[str]:
        return list(self.site_channels)

    @property
    def encoder_sites(self) -> list[str]:
        return [s for s in self.site_channels if s.startswith("enc")]

    @property
    def tasks(self) -> list[str]:
        first = next(iter(self.blocks.values()))
        return list(first.keys())

    def register_task(self, task: str, clone_of: str | None = None) -> None:
        """Add a task's blocks at every site, freshly initialized or cloned
        from an already-registered task."""
        if task in self.tasks:
            raise ConfigurationError(f"task {task!r} is already registered")
        if clone_of is not None and clone_of not in self.tasks:
            raise ConfigurationError(
                f"cannot clone from unregistered task {clone_of!r}; "
                f"registered: {self.tasks}"
            )
        for site, channels in self.site_channels.items():
            if clone_of is None:
                block = ChannelAttentionBlock(channels, self.reduction)
            else:
                block = copy.deepcopy(self.blocks[site][clone_of])
            self.blocks[site][task] = block

    def _block(self, site: str, task: str) -> ChannelAttentionBlock:
        if site not in self.blocks:
            raise ConfigurationError(f"unknown adapter site {site!r}; sites: {self.sites}")
        site_blocks = self.blocks[site]
        if task not in site_blocks:
            raise ConfigurationError(
                f"task {task!r} is not registered; registered tasks: {self.tasks}"
            )
        return site_blocks[task]

    def forward(self, feat: torch.Tensor, site: str, task: str) -> tuple[torch.Tensor, torch.Tensor]:
        return self._block(site, task)(feat)

    def task_parameters(self, task: str):
        """Parameters owned by one task across all sites."""
        if task not in self.tasks:
            raise ConfigurationError(
                f"task {task!r} is not registered; registered tasks: {self.tasks}"
            )
        for site in self.sites:
            yield from self.blocks[site][task].parameters()
