"""The assembled codec: transforms, importance gate, grouping, entropy model,
task adapters, checkpoint IO, and the simulated and real coding paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from taskcodec import coder, container
from taskcodec.adapters import TaskAdapterBank
from taskcodec.context import EntropyParams, GroupedEntropyModel, RateReport, checkerboard_masks
from taskcodec.entropy import bits_from_likelihood, gaussian_window_likelihood, quantize
from taskcodec.errors import ConfigurationError, DecodeError
from taskcodec.grouping import GroupSpec, default_group_spec, group_and_scale, ungroup_and_rescale
from taskcodec.importance import ChannelScorer
from taskcodec.transforms import (
    DECODER_SITES,
    ENCODER_SITES,
    STRIDE,
    AnalysisTransform,
    HyperAnalysis,
    HyperSynthesis,
    SynthesisTransform,
)

CHECKPOINT_VERSION = 1


@dataclass
class TrainOutput:
    """Everything a training step needs from one forward pass."""

    reconstruction: torch.Tensor
    channel_weights: torch.Tensor
    channel_logits: torch.Tensor
    encoder_gammas: dict[str, torch.Tensor]
    decoder_gammas: dict[str, torch.Tensor]
    bpp_latent: torch.Tensor
    bpp_hyper: torch.Tensor


class ImageCodec(nn.Module):
    def __init__(
        self,
        latent_channels: int = 48,
        hidden: int = 64,
        hyper_channels: int = 32,
        group_spec: GroupSpec | None = None,
        adapter_reduction: int = 4,
        scorer_bypass: bool = False,
    ):
        super().__init__()
        spec = group_spec if group_spec is not None else default_group_spec(latent_channels)
        if spec.channels != latent_channels:
            raise ConfigurationError(
                f"group spec covers {spec.channels} channels, model has {latent_channels}"
            )
        self.latent_channels = latent_channels
        self.hidden = hidden
        self.hyper_channels = hyper_channels
        self.adapter_reduction = adapter_reduction
        self.group_spec = spec

        self.analysis = AnalysisTransform(3, hidden, latent_channels)
        self.synthesis = SynthesisTransform(latent_channels, hidden, 3)
        self.hyper_analysis = HyperAnalysis(latent_channels, hidden, hyper_channels)
        self.hyper_synthesis = HyperSynthesis(hyper_channels, hidden, latent_channels)
        self.scorer = ChannelScorer(latent_channels, bypass=scorer_bypass)
        self.entropy_model = GroupedEntropyModel(spec.sizes, hyper_channels)
        sites = {s: hidden for s in ENCODER_SITES + DECODER_SITES}
        self.adapters = TaskAdapterBank(sites, adapter_reduction)

    # ---- spec management -------------------------------------------------

    def set_group_spec(self, spec: GroupSpec) -> None:
        if tuple(spec.sizes) != tuple(self.group_spec.sizes):
            raise ConfigurationError(
                f"cannot change group sizes {self.group_spec.sizes} -> {spec.sizes} "
                "on a built model; scales and permutation are free"
            )
        self.group_spec = spec

    @torch.no_grad()
    def bake_permutation(self) -> None:
        """Rewire latent channels so the recorded permutation becomes identity.

        New channel j of the analysis output takes over what channel
        permutation[j] used to produce, and the scorer and the synthesis input
        are relabeled to match.  The scaled latent entering the hyper/entropy
        stack is unchanged (up to float summation order), so this preserves the
        codec's input/output behaviour while making the encoder emit channels
        already sorted by the recorded ranking.  No-op without a permutation.
        """
        perm = self.group_spec.permutation
        if perm is None:
            return
        idx = torch.as_tensor(perm, dtype=torch.long)
        conv = self.analysis.conv4  # (out, in, kh, kw): relabel outputs
        conv.weight.copy_(conv.weight[idx].clone())
        conv.bias.copy_(conv.bias[idx].clone())
        fc1, fc2 = self.scorer.fc1, self.scorer.fc2
        fc1.weight.copy_(fc1.weight[:, idx].clone())  # pooled-latent inputs
        fc2.weight.copy_(fc2.weight[idx].clone())  # per-channel weight outputs
        fc2.bias.copy_(fc2.bias[idx].clone())
        deconv = self.synthesis.deconv1  # (in, out, kh, kw): relabel inputs
        deconv.weight.copy_(deconv.weight[idx].clone())
        self.group_spec = self.group_spec.with_permutation(None)

    def _adapter_args(self, task: str | None):
        return (self.adapters, task) if task is not None else (None, None)

    # ---- encoder-side pieces ----------------------------------------------

    def analyze(self, image: torch.Tensor, task: str | None = None):
        """Image -> (latent, encoder gate vectors)."""
        adapters, t = self._adapter_args(task)
        return self.analysis(image, adapters, t)

    def synthesize(self, latent: torch.Tensor, task: str | None = None):
        """Latent (unscaled domain) -> ([0,1] image, decoder gate vectors)."""
        adapters, t = self._adapter_args(task)
        return self.synthesis(latent, adapters, t)

    def encode_stages(self, image: torch.Tensor, task: str | None = None,
                      spec: GroupSpec | None = None):
        """Shared front half of every coding path."""
        spec = self.group_spec if spec is None else spec
        y, enc_gammas = self.analyze(image, task)
        weights, gated = self.scorer(y)
        scaled = group_and_scale(gated, spec)
        z = self.hyper_analysis(scaled)
        return y, enc_gammas, weights, scaled, z

    def _base_maps(self, z_hat: torch.Tensor, latent_hw: tuple[int, int]) -> torch.Tensor:
        return self.hyper_synthesis(z_hat, latent_hw)

    # ---- training forward -------------------------------------------------

    def forward(
        self,
        image: torch.Tensor,
        task: str | None = None,
        noise: dict | None = None,
        generator: torch.Generator | None = None,
        values: str = "ste",
    ) -> TrainOutput:
        """Train-mode pass: noise-quantized rate, straight-through decode.

        values="noisy" switches the decode path to the fully differentiable
        noise relaxation (see GroupedEntropyModel.sequential_train).
        """
        y, enc_gammas, weights, scaled, z = self.encode_stages(image, task)
        logits = self.scorer.score_logits(y)
        latent_hw = scaled.shape[-2:]

        z_noise = None if noise is None else noise.get("hyper")
        z_hat = self.entropy_model.hyper_quantize(z, "train", noise=z_noise, generator=generator)
        base = self._base_maps(z_hat, latent_hw)

        group_noise = None if noise is None else noise.get("groups")
        blocks, likelihoods = self.entropy_model.sequential_train(
            scaled, base, self.group_spec, noise=group_noise, generator=generator,
            values=values,
        )
        n_pixels = float(image.shape[0] * image.shape[-2] * image.shape[-1])
        bits_latent = sum(bits_from_likelihood(lk) for lk in likelihoods)
        bits_hyper = bits_from_likelihood(self.entropy_model.hyper_likelihood(z_hat))

        y_hat = ungroup_and_rescale(torch.cat(blocks, dim=1), self.group_spec)
        recon, dec_gammas = self.synthesize(y_hat, task)
        return TrainOutput(
            reconstruction=recon,
            channel_weights=weights,
            channel_logits=logits,
            encoder_gammas=enc_gammas,
            decoder_gammas=dec_gammas,
            bpp_latent=bits_latent / n_pixels,
            bpp_hyper=bits_hyper / n_pixels,
        )

    # ---- eval-mode rate estimation -----------------------------------------

    def estimate_rate(
        self,
        scaled: torch.Tensor,
        z: torch.Tensor,
        spec: GroupSpec | None = None,
        image_hw: tuple[int, int] | None = None,
        mode: str = "eval",
        generator: torch.Generator | None = None,
    ) -> RateReport:
        """Bit cost of a scaled latent + hyper pair without producing bytes."""
        spec = spec if spec is not None else self.group_spec
        latent_hw = scaled.shape[-2:]
        if image_hw is None:
            image_hw = (latent_hw[0] * STRIDE, latent_hw[1] * STRIDE)
        batch = scaled.shape[0]

        z_hat = self.entropy_model.hyper_quantize(z, mode, generator=generator)
        hyper_bits = float(bits_from_likelihood(self.entropy_model.hyper_likelihood(z_hat)).detach())
        base = self._base_maps(z_hat, latent_hw)
        if mode == "eval":
            _, _, bits = self.entropy_model.sequential_eval(scaled, base, spec)
            group_bits = [float(b.detach()) for b in bits]
        else:
            _, likelihoods = self.entropy_model.sequential_train(
                scaled, base, spec, generator=generator
            )
            group_bits = [float(bits_from_likelihood(lk).detach()) for lk in likelihoods]
        elements = [batch * s * latent_hw[0] * latent_hw[1] for s in spec.sizes]
        return RateReport(group_bits, elements, hyper_bits, batch, image_hw)

    @torch.no_grad()
    def eval_coding(self, image: torch.Tensor, task: str | None = None,
                    spec: GroupSpec | None = None):
        """Eval-mode entropy pass, optionally under a group-spec override.

        Returns (group blocks, per-group entropy params in the scaled domain,
        per-group bits, hyper bits, channel weights, spec used).
        """
        spec = self.group_spec if spec is None else spec
        _, _, weights, scaled, z = self.encode_stages(image, task, spec)
        latent_hw = scaled.shape[-2:]
        z_hat = self.entropy_model.hyper_quantize(z, "eval")
        hyper_bits = float(bits_from_likelihood(self.entropy_model.hyper_likelihood(z_hat)))
        base = self._base_maps(z_hat, latent_hw)
        blocks, params, bits = self.entropy_model.sequential_eval(scaled, base, spec)
        return blocks, params, bits, hyper_bits, weights, spec

    @torch.no_grad()
    def simulate(self, image: torch.Tensor, task: str | None = None):
        """Eval-mode coding without bytes: quantize each group sequentially,
        decode from the quantized values, report the bit cost.

        Returns (reconstruction, rate report, decoded latent, channel weights).
        """
        blocks, _, bits, hyper_bits, weights, spec = self.eval_coding(image, task)
        y_hat = ungroup_and_rescale(torch.cat(blocks, dim=1), spec)
        recon, _ = self.synthesize(y_hat, task)
        image_hw = (image.shape[-2], image.shape[-1])
        latent_hw = (y_hat.shape[-2], y_hat.shape[-1])
        elements = [
            image.shape[0] * s * latent_hw[0] * latent_hw[1] for s in spec.sizes
        ]
        report = RateReport([float(b) for b in bits], elements, hyper_bits,
                            image.shape[0], image_hw)
        return recon, report, y_hat, weights

    # ---- real coding ---------------------------------------------------------

    @torch.no_grad()
    def compress(self, image: torch.Tensor, task: str, lam: float = 0.0):
        """Image -> container bytes plus the encoder-side reconstruction."""
        if image.dim() != 4 or image.shape[0] != 1:
            raise ConfigurationError("compress codes one image at a time: (1, 3, H, W)")
        _, _, _, scaled, z = self.encode_stages(image, task)
        latent_hw = scaled.shape[-2:]
        spec = self.group_spec

        # hyper segment: per-channel density, symbols clamped into row support
        mean_map = self.entropy_model._hyper_mean_map(z)
        _, h_scale = self.entropy_model.hyper_params()
        scale_map = h_scale.view(1, -1, 1, 1).to(z.dtype).expand_as(z).contiguous()
        rows, radii, idx = coder.gaussian_cdf_rows(scale_map.numpy())
        q = coder.clamp_offsets(
            torch.round(z - mean_map).numpy().astype(np.int64), radii, idx
        )
        hyper_segment = coder.encode_symbols(
            coder.offsets_to_symbols(q, radii, idx), rows, idx
        )
        z_hat = mean_map + torch.from_numpy(q.astype(np.float32)).view_as(z)

        base = self._base_maps(z_hat, latent_hw)
        amask, nmask = checkerboard_masks(*latent_hw, scaled.device, scaled.dtype)
        true_blocks = list(torch.split(scaled, list(spec.sizes), dim=1))
        pending: dict[int, list] = {}

        def visit(i: int, phase: str, params: EntropyParams) -> torch.Tensor:
            mask = amask if phase == "anchor" else nmask
            sel = mask.expand_as(params.mean).bool()
            rows_p, radii_p, idx_p = coder.gaussian_cdf_rows(params.scale[sel].numpy())
            q_p = coder.clamp_offsets(
                torch.round(true_blocks[i] - params.mean)[sel].numpy().astype(np.int64),
                radii_p, idx_p,
            )
            pending.setdefault(i, []).append(
                (coder.offsets_to_symbols(q_p, radii_p, idx_p), rows_p, idx_p)
            )
            out = torch.zeros_like(params.mean)
            out[sel] = torch.from_numpy(q_p.astype(np.float32))
            return params.mean + out

        blocks, _ = self.entropy_model.run_groups(base, spec, visit)

        segments = [hyper_segment]
        for i in range(spec.n_groups):
            (sym_a, rows_a, idx_a), (sym_n, rows_n, idx_n) = pending[i]
            all_rows = list(rows_a) + list(rows_n)
            all_idx = np.concatenate([idx_a, idx_n + len(rows_a)])
            all_sym = np.concatenate([sym_a, sym_n])
            segments.append(coder.encode_symbols(all_sym, all_rows, all_idx))

        header = container.StreamHeader(
            image.shape[-2], image.shape[-1], spec, task, float(lam)
        )
        stream = container.pack(header, segments)

        y_hat = ungroup_and_rescale(torch.cat(blocks, dim=1), spec)
        recon, _ = self.synthesize(y_hat, task)
        return stream, recon

    @torch.no_grad()
    def decompress(self, stream: bytes):
        """Container bytes -> ([0,1] image, stream header)."""
        header, segments = container.unpack(stream)
        spec = header.spec
        if tuple(spec.sizes) != tuple(self.group_spec.sizes):
            raise DecodeError(
                f"stream group sizes {spec.sizes} do not match the model {self.group_spec.sizes}"
            )
        if header.height % STRIDE or header.width % STRIDE:
            raise DecodeError(f"stream dims {header.height}x{header.width} are not codable")
        latent_hw = (header.height // STRIDE, header.width // STRIDE)
        hz = (latent_hw[0] + 1) // 2
        wz = (latent_hw[1] + 1) // 2
        hyper_hw = ((hz + 1) // 2, (wz + 1) // 2)

        h_mean, h_scale = self.entropy_model.hyper_params()
        shape_z = (1, self.hyper_channels, *hyper_hw)
        scale_map = h_scale.view(1, -1, 1, 1).expand(shape_z).float().contiguous()
        mean_map = h_mean.view(1, -1, 1, 1).expand(shape_z).float().contiguous()
        rows, radii, idx = coder.gaussian_cdf_rows(scale_map.numpy())
        symbols = coder.decode_symbols(segments[0], rows, idx)
        q = coder.symbols_to_offsets(symbols, radii, idx)
        z_hat = mean_map + torch.from_numpy(q.astype(np.float32)).view(shape_z)

        base = self._base_maps(z_hat, latent_hw)
        amask, nmask = checkerboard_masks(*latent_hw, base.device, base.dtype)
        decoders = [coder.StreamDecoder(seg) for seg in segments[1:]]

        def visit(i: int, phase: str, params: EntropyParams) -> torch.Tensor:
            mask = amask if phase == "anchor" else nmask
            sel = mask.expand_as(params.mean).bool()
            rows_p, radii_p, idx_p = coder.gaussian_cdf_rows(params.scale[sel].numpy())
            sym = decoders[i].decode(rows_p, idx_p)
            q_p = coder.symbols_to_offsets(sym, radii_p, idx_p)
            out = torch.zeros_like(params.mean)
            out[sel] = torch.from_numpy(q_p.astype(np.float32))
            return params.mean + out

        blocks, _ = self.entropy_model.run_groups(base, spec, visit)
        for dec in decoders:
            dec.finish()

        y_hat = ungroup_and_rescale(torch.cat(blocks, dim=1), spec)
        recon, _ = self.synthesize(y_hat, header.task)
        return recon, header


# ---- checkpoints -------------------------------------------------------------


def save_checkpoint(path, codec: ImageCodec, meta: dict | None = None) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "arch": {
            "latent_channels": codec.latent_channels,
            "hidden": codec.hidden,
            "hyper_channels": codec.hyper_channels,
            "adapter_reduction": codec.adapter_reduction,
            "scorer_bypass": codec.scorer.bypass,
        },
        "group_spec": codec.group_spec.to_dict(),
        "tasks": codec.adapters.tasks,
        "state_dict": codec.state_dict(),
        "meta": dict(meta or {}),
    }
    torch.save(payload, path)


def load_checkpoint(path) -> tuple[ImageCodec, dict]:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ConfigurationError(
            f"checkpoint format {version!r} is not supported (expected {CHECKPOINT_VERSION})"
        )
    spec = GroupSpec.from_dict(payload["group_spec"])
    codec = ImageCodec(group_spec=spec, **payload["arch"])
    for task in payload["tasks"]:
        codec.adapters.register_task(task)
    codec.load_state_dict(payload["state_dict"])
    codec.eval()
    return codec, payload["meta"]
