"""Diagnostic probes on a trained codec.

Three experiment families, all reading the frozen task classifier's accuracy
on reconstructions decoded from a perturbed latent:

- channel/group distortion: zero out or add bounded uniform noise to one unit
  of the decoded latent and measure the accuracy hit, one row per unit;
- channel removal curves: zero channels cumulatively, least-important-first
  per the learned weights versus seeded random orders, and compare the areas
  under the two accuracy curves;
- scale sweeps: re-run the entropy stage over a grid of quantization scales
  for one group, recording how each group's prior (mean/scale maps, read in
  the unscaled domain) moves relative to an all-unit-scale reference run and
  how accuracy and rate respond, then summarize each metric with a quadratic
  least-squares fit over the group's natural axis (1/s for the mid groups,
  log10 s for the tail group).

Probes never mutate the codec; every random choice is derived from an
explicit seed, and perturbation units are seeded independently so results do
not depend on evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from taskcodec.codec import ImageCodec
from taskcodec.errors import ConfigurationError, FittingError
from taskcodec.grouping import GroupSpec, ungroup_and_rescale
from taskcodec.tasknet import TaskClassifier

DEFAULT_INTENSITIES = (0.5, 1.0)
RANDOM_ORDER_SEEDS = (0, 1, 2, 3, 4)


# ---- shared plumbing --------------------------------------------------------

@torch.no_grad()
def decode_latents(
    codec: ImageCodec,
    images: torch.Tensor,
    task: str,
    batch: int = 128,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Eval-mode decoded latents for a dataset.

    Returns (latents in the unscaled domain, dataset-mean channel weights).
    """
    outs, weight_sums = [], None
    for lo in range(0, len(images), batch):
        _, _, y_hat, weights = codec.simulate(images[lo:lo + batch], task=task)
        outs.append(y_hat)
        total = weights.sum(dim=0)
        weight_sums = total if weight_sums is None else weight_sums + total
    return torch.cat(outs, dim=0), weight_sums / len(images)


@torch.no_grad()
def accuracy_from_latent(
    codec: ImageCodec,
    task_model: TaskClassifier,
    latents: torch.Tensor,
    labels: torch.Tensor,
    task: str,
    batch: int = 128,
) -> float:
    hits = 0
    for lo in range(0, len(latents), batch):
        recon, _ = codec.synthesize(latents[lo:lo + batch], task=task)
        logits = task_model(recon)
        hits += int((logits.argmax(dim=1) == labels[lo:lo + batch]).sum())
    return hits / len(latents)


def zero_unit(latents: torch.Tensor, channels: slice) -> torch.Tensor:
    """Copy of the latents with one channel range zeroed; all other values
    are bitwise untouched."""
    out = latents.clone()
    out[:, channels] = 0.0
    return out


def noise_unit(latents: torch.Tensor, channels: slice, intensity: float,
               seed: int) -> torch.Tensor:
    """Copy with bounded uniform noise in [-intensity, intensity] added to one
    channel range; other values are bitwise untouched."""
    out = latents.clone()
    gen = torch.Generator().manual_seed(seed)
    target = out[:, channels]
    noise = (torch.rand(target.shape, generator=gen) * 2.0 - 1.0) * intensity
    out[:, channels] = target + noise
    return out


# ---- distortion probe -------------------------------------------------------

@torch.no_grad()
def distortion_probe(
    codec: ImageCodec,
    task_model: TaskClassifier,
    images: torch.Tensor,
    labels: torch.Tensor,
    task: str,
    mode: str = "zero",
    intensity: float = 0.0,
    group_size: int = 1,
    seed: int = 0,
    batch: int = 128,
) -> list[dict]:
    """Perturb one unit (a channel, or a contiguous block of group_size
    channels) of the decoded latent at a time and evaluate task accuracy.

    Returns one row per unit; every row carries the unperturbed baseline.
    """
    if mode not in ("zero", "noise"):
        raise ConfigurationError(f"mode must be 'zero' or 'noise', got {mode!r}")
    channels = codec.latent_channels
    if group_size < 1 or channels % group_size != 0:
        raise ConfigurationError(
            f"group size {group_size} does not evenly divide {channels} channels"
        )
    latents, _ = decode_latents(codec, images, task, batch)
    baseline = accuracy_from_latent(codec, task_model, latents, labels, task, batch)

    rows = []
    for unit in range(channels // group_size):
        lo, hi = unit * group_size, (unit + 1) * group_size
        sl = slice(lo, hi)
        if mode == "zero":
            perturbed = zero_unit(latents, sl)
        else:
            perturbed = noise_unit(latents, sl, intensity, seed * 100003 + unit)
        acc = accuracy_from_latent(codec, task_model, perturbed, labels, task, batch)
        rows.append({
            "unit": unit, "lo": lo, "hi": hi, "mode": mode,
            "intensity": intensity if mode == "noise" else "",
            "accuracy": acc, "baseline": baseline,
        })
    return rows


# ---- removal curves ---------------------------------------------------------

@torch.no_grad()
def removal_curve(
    codec: ImageCodec,
    task_model: TaskClassifier,
    images: torch.Tensor,
    labels: torch.Tensor,
    task: str,
    order: np.ndarray,
    batch: int = 128,
    latents: torch.Tensor | None = None,
) -> list[dict]:
    """Accuracy after zeroing the first k channels of `order`, k = 0..C."""
    channels = codec.latent_channels
    order = np.asarray(order)
    if sorted(order.tolist()) != list(range(channels)):
        raise ConfigurationError("removal order must be a permutation of all channels")
    if latents is None:
        latents, _ = decode_latents(codec, images, task, batch)
    rows = []
    work = latents.clone()
    for k in range(channels + 1):
        if k > 0:
            work[:, int(order[k - 1])] = 0.0
        acc = accuracy_from_latent(codec, task_model, work, labels, task, batch)
        rows.append({"k": k, "accuracy": acc})
    return rows


def curve_auc(rows: list[dict]) -> float:
    """Trapezoidal area under the accuracy-vs-removed-count curve."""
    ks = np.array([r["k"] for r in rows], dtype=np.float64)
    acc = np.array([r["accuracy"] for r in rows], dtype=np.float64)
    return float(np.trapezoid(acc, ks))


@torch.no_grad()
def removal_study(
    codec: ImageCodec,
    task_model: TaskClassifier,
    images: torch.Tensor,
    labels: torch.Tensor,
    task: str,
    seeds: tuple[int, ...] = RANDOM_ORDER_SEEDS,
    batch: int = 128,
) -> dict:
    """Importance-ordered removal (least important channel first) against
    random orders averaged over several seeds."""
    channels = codec.latent_channels
    latents, mean_w = decode_latents(codec, images, task, batch)
    w = mean_w.cpu().numpy().astype(np.float64)
    importance = np.argsort(w, kind="stable")  # ascending: least important first

    imp_rows = removal_curve(codec, task_model, images, labels, task,
                             importance, batch, latents=latents)
    random_runs = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        rows = removal_curve(codec, task_model, images, labels, task,
                             rng.permutation(channels), batch, latents=latents)
        random_runs.append(rows)
    random_mean = [
        {"k": k, "accuracy": float(np.mean([run[k]["accuracy"] for run in random_runs]))}
        for k in range(channels + 1)
    ]
    return {
        "importance": imp_rows,
        "random": random_mean,
        "random_runs": random_runs,
        "order": [int(i) for i in importance],
        "auc_importance": curve_auc(imp_rows),
        "auc_random": curve_auc(random_mean),
    }


# ---- scale sweeps -----------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    """Least-squares quadratic y = a x^2 + b x + c plus fit quality."""

    coeffs: tuple[float, float, float]
    vertex: float
    cc: float
    rmse: float

    @property
    def concave(self) -> bool:
        """True when the parabola opens downward, i.e. the vertex is an argmax."""
        return self.coeffs[0] < 0


def fit_quadratic(x, y) -> FitResult:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise FittingError(f"x and y must be 1-D and equal length, got {x.shape} / {y.shape}")
    if len(x) < 3:
        raise FittingError(f"quadratic fit needs at least 3 points, got {len(x)}")
    if len(np.unique(x)) < 3:
        raise FittingError("quadratic fit needs at least 3 distinct x values")
    a, b, c = np.polyfit(x, y, 2)
    if a == 0.0:
        raise FittingError("fit degenerated to a line; vertex is undefined")
    fitted = np.polyval([a, b, c], x)
    residual = y - fitted
    rmse = float(np.sqrt(np.mean(residual ** 2)))
    sy, sf = np.std(y), np.std(fitted)
    if sy == 0.0 or sf == 0.0:
        cc = 1.0 if np.allclose(y, fitted) else 0.0
    else:
        cc = float(np.corrcoef(y, fitted)[0, 1])
    return FitResult((float(a), float(b), float(c)), float(-b / (2 * a)), cc, rmse)


def sweep_axis(spec: GroupSpec, group_index: int, scales) -> np.ndarray:
    """The fitting axis for one group: 1/s for mid groups, log10(s) for the
    tail group.  The first group's scale is pinned to 1 and cannot be swept."""
    if not 1 <= group_index < spec.n_groups:
        raise ConfigurationError(
            f"sweep group index must be in [1, {spec.n_groups - 1}], got {group_index}"
        )
    s = np.asarray(scales, dtype=np.float64)
    if np.any(s <= 0):
        raise ConfigurationError("scales must be positive")
    return np.log10(s) if group_index == spec.n_groups - 1 else 1.0 / s


@torch.no_grad()
def _restored_params(codec: ImageCodec, images: torch.Tensor, task: str,
                     spec: GroupSpec) -> tuple[list[tuple[torch.Tensor, torch.Tensor]], float, float]:
    """Per-group (mean, scale) prior maps mapped back to the unscaled domain,
    plus accuracy-path inputs: (params, total bits, latents)."""
    blocks, params, bits, hyper_bits, _, spec = codec.eval_coding(images, task, spec)
    restored = [
        (p.mean * s, p.scale * s) for p, s in zip(params, spec.scales)
    ]
    y_hat = ungroup_and_rescale(torch.cat(blocks, dim=1), spec)
    total_bits = float(sum(float(b) for b in bits) + hyper_bits)
    return restored, total_bits, y_hat


@torch.no_grad()
def sweep_scale(
    codec: ImageCodec,
    task_model: TaskClassifier,
    images: torch.Tensor,
    labels: torch.Tensor,
    task: str,
    group_index: int,
    grid,
    batch: int = 128,
) -> dict:
    """Sweep one group's quantization scale over a grid, others held fixed.

    Per grid point this re-runs the entropy stage, then records (a) each
    group's prior movement against an all-unit-scale reference of the same
    model — mean squared difference of the unscaled-domain mean/scale maps —
    and (b) task accuracy plus bits per pixel.  Both metrics are summarized
    by quadratic fits over the group's axis transform.
    """
    grid = [float(s) for s in grid]
    if len(grid) < 3:
        raise FittingError(f"sweep needs at least 3 grid points, got {len(grid)}")
    spec = codec.group_spec
    xs = sweep_axis(spec, group_index, grid)

    unit_spec = GroupSpec(spec.sizes, (1.0,) * spec.n_groups, spec.permutation)
    ref_params, _, _ = _restored_params(codec, images, task, unit_spec)

    n_pixels = images.shape[0] * images.shape[-2] * images.shape[-1]
    prior_rows, accuracy_rows = [], []
    for s, x in zip(grid, xs):
        swept = spec.with_scale(group_index, s)
        params, total_bits, y_hat = _restored_params(codec, images, task, swept)
        for j, ((m, sc), (m0, sc0)) in enumerate(zip(params, ref_params)):
            mse = 0.5 * (float(((m - m0) ** 2).mean()) + float(((sc - sc0) ** 2).mean()))
            prior_rows.append({
                "group": j, "swept_group": group_index, "scale": s, "x": float(x),
                "prior_mse": mse,
            })
        acc = accuracy_from_latent(codec, task_model, y_hat, labels, task, batch)
        accuracy_rows.append({
            "swept_group": group_index, "scale": s, "x": float(x),
            "accuracy": acc, "bpp": total_bits / n_pixels,
        })

    own = [r for r in prior_rows if r["group"] == group_index]
    fits = {
        "prior_mse": fit_quadratic([r["x"] for r in own], [r["prior_mse"] for r in own]),
        "accuracy": fit_quadratic([r["x"] for r in accuracy_rows],
                                  [r["accuracy"] for r in accuracy_rows]),
    }
    return {"prior_rows": prior_rows, "accuracy_rows": accuracy_rows, "fits": fits}
