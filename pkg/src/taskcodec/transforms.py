"""Convolutional analysis/synthesis transforms and their hyper counterparts.

The main pair maps a [0,1] RGB image to a latent at 1/16 spatial resolution
and back; the hyper pair compresses the (already scaled) latent a further 4x
into side information from which per-channel base entropy parameters are
predicted.  Task adapter blocks are applied at three fixed sites inside each
main transform when an adapter bank is supplied.
"""

from __future__ import annotations

import torch
from torch import nn

from taskcodec.adapters import TaskAdapterBank
from taskcodec.errors import ConfigurationError

STRIDE = 16
HYPER_STRIDE = 4

ENCODER_SITES = ("enc0", "enc1", "enc2")
DECODER_SITES = ("dec0", "dec1", "dec2")


def _clamp_unit_ste(x: torch.Tensor) -> torch.Tensor:
    # Hard clamp in the output, straight-through in the gradient, so training
    # never stalls on pixels that start outside [0, 1].
    return x + (x.clamp(0.0, 1.0) - x).detach()


class AnalysisTransform(nn.Module):
    def __init__(self, in_channels: int = 3, hidden: int = 64, latent_channels: int = 48):
        super().__init__()
        self.latent_channels = latent_channels
        self.hidden = hidden
        self.conv1 = nn.Conv2d(in_channels, hidden, 5, stride=2, padding=2)
        self.conv2 = nn.Conv2d(hidden, hidden, 3, stride=2, padding=1)
        self.conv3 = nn.Conv2d(hidden, hidden, 3, stride=2, padding=1)
        self.conv4 = nn.Conv2d(hidden, latent_channels, 3, stride=2, padding=1)

    def forward(
        self,
        image: torch.Tensor,
        adapters: TaskAdapterBank | None = None,
        task: str | None = None,
    ) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
        if image.dim() != 4:
            raise ConfigurationError(f"expected (B, 3, H, W) image, got {tuple(image.shape)}")
        if image.shape[-1] % STRIDE or image.shape[-2] % STRIDE:
            raise ConfigurationError(
                f"image dims {tuple(image.shape[-2:])} must be multiples of {STRIDE}"
            )
        gammas: dict[str, torch.Tensor] = {}

        def site(feat: torch.Tensor, name: str) -> torch.Tensor:
            if adapters is None:
                return feat
            gamma, feat = adapters(feat, name, task)
            gammas[name] = gamma
            return feat

        f = site(torch.relu(self.conv1(image)), "enc0")
        f = site(torch.relu(self.conv2(f)), "enc1")
        f = site(torch.relu(self.conv3(f)), "enc2")
        return self.conv4(f), gammas


class SynthesisTransform(nn.Module):
    def __init__(self, latent_channels: int = 48, hidden: int = 64, out_channels: int = 3):
        super().__init__()
        self.deconv1 = nn.ConvTranspose2d(latent_channels, hidden, 3, stride=2,
                                          padding=1, output_padding=1)
        self.deconv2 = nn.ConvTranspose2d(hidden, hidden, 3, stride=2,
                                          padding=1, output_padding=1)
        self.deconv3 = nn.ConvTranspose2d(hidden, hidden, 3, stride=2,
                                          padding=1, output_padding=1)
        self.deconv4 = nn.ConvTranspose2d(hidden, out_channels, 5, stride=2,
                                          padding=2, output_padding=1)

    def forward(
        self,
        latent: torch.Tensor,
        adapters: TaskAdapterBank | None = None,
        task: str | None = None,
    ) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
        gammas: dict[str, torch.Tensor] = {}

        def site(feat: torch.Tensor, name: str) -> torch.Tensor:
            if adapters is None:
                return feat
            gamma, feat = adapters(feat, name, task)
            gammas[name] = gamma
            return feat

        f = site(torch.relu(self.deconv1(latent)), "dec0")
        f = site(torch.relu(self.deconv2(f)), "dec1")
        f = site(torch.relu(self.deconv3(f)), "dec2")
        return _clamp_unit_ste(self.deconv4(f)), gammas


class HyperAnalysis(nn.Module):
    def __init__(self, latent_channels: int = 48, hidden: int = 64, hyper_channels: int = 32):
        super().__init__()
        self.hyper_channels = hyper_channels
        self.net = nn.Sequential(
            nn.Conv2d(latent_channels, hidden, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(hidden, hyper_channels, 3, stride=2, padding=1),
        )

    def forward(self, scaled_latent: torch.Tensor) -> torch.Tensor:
        return self.net(scaled_latent)


class HyperSynthesis(nn.Module):
    """Hyper decoder: side information -> per-channel (mean, raw scale) maps."""

    def __init__(self, hyper_channels: int = 32, hidden: int = 64, latent_channels: int = 48):
        super().__init__()
        self.latent_channels = latent_channels
        self.deconv1 = nn.ConvTranspose2d(hyper_channels, hidden, 3, stride=2,
                                          padding=1, output_padding=1)
        self.deconv2 = nn.ConvTranspose2d(hidden, hidden, 3, stride=2,
                                          padding=1, output_padding=1)
        self.proj = nn.Conv2d(hidden, 2 * latent_channels, 3, padding=1)

    def forward(self, hyper: torch.Tensor, latent_hw: tuple[int, int]) -> torch.Tensor:
        f = torch.relu(self.deconv1(hyper))
        f = torch.relu(self.deconv2(f))
        f = self.proj(f)
        h, w = latent_hw
        if f.shape[-2] < h or f.shape[-1] < w:
            raise ConfigurationError(
                f"hyper features {tuple(f.shape[-2:])} cannot cover latent {latent_hw}"
            )
        # Strides only guarantee coverage, not equality, for latents whose
        # sides are not multiples of the hyper stride.
        return f[..., :h, :w]
