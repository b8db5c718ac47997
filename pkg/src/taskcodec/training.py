"""Three-stage training.

Stage 1 trains the importance scorer alone on the rate-distortion objective
while the rest of the codec stays frozen; its checkpoint records the scorer's
dataset-mean channel ranking as the grouping permutation so the model is
codable as-is.  Stage 2 folds that ranking into the encoder wiring (so the
explicit permutation becomes identity), unfreezes everything except the task
network, and adds the channel-order penalties that keep per-image weights
sorted as the transforms train.  Stage 3 adapts a new task by training only
that task's adapter blocks.

Every stage writes one CSV row per epoch (loss terms, rate, held-out accuracy)
so runs can be compared without rerunning anything.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from taskcodec.codec import ImageCodec
from taskcodec.errors import ConfigurationError
from taskcodec.importance import mean_weights, rank_channels
from taskcodec.losses import LossWeights, basic_loss, total_loss
from taskcodec.tasknet import TaskClassifier, accuracy, make_dataset

# (epochs, learning rate, batch size) per stage
DEFAULT_SCHEDULES: dict[int, tuple[int, float, int]] = {
    1: (30, 1e-4, 12),
    2: (30, 1e-4, 12),
    3: (10, 1e-4, 32),
}

METRIC_FIELDS = [
    "epoch", "loss", "mse", "bpp_latent", "bpp_hyper",
    "order_channels", "order_adapters", "val_accuracy", "val_bpp",
]


@dataclass
class TrainConfig:
    stage: int
    task: str
    lam: float = 1.0
    phi_adapters: float = 0.1
    phi_channels: float = 0.3
    epochs: int | None = None
    lr: float | None = None
    batch_size: int | None = None
    n_train: int = 512
    n_val: int = 256
    data_seed: int = 11
    seed: int = 0
    eval_batch: int = 128
    clip_norm: float = 1.0  # gradient-norm ceiling; 0 disables clipping
    cosine_lr: bool = False  # anneal the learning rate to zero over the stage
    # The rate model charges almost nothing for spatially flat latents, so the
    # raw R-D objective admits solutions whose magnitudes grow without bound
    # (and whose gates therefore saturate).  A small decay picks the
    # small-magnitude member of that family; 0 disables it.
    weight_decay: float = 0.0

    def __post_init__(self) -> None:
        if self.stage not in DEFAULT_SCHEDULES:
            raise ConfigurationError(f"stage must be 1, 2 or 3, got {self.stage}")
        sched = DEFAULT_SCHEDULES[self.stage]
        if self.epochs is None:
            self.epochs = sched[0]
        if self.lr is None:
            self.lr = sched[1]
        if self.batch_size is None:
            self.batch_size = sched[2]

    @property
    def loss_weights(self) -> LossWeights:
        return LossWeights(self.lam, self.phi_adapters, self.phi_channels)


def apply_stage_freeze(codec: ImageCodec, stage: int, task: str) -> list[torch.nn.Parameter]:
    """Set requires_grad for the stage's contract; returns the trainable set.

    Stage 1: the importance scorer only.  Stage 2: the whole codec (the task
    network is not part of the codec and never trains).  Stage 3: only the
    named task's adapter blocks.
    """
    for p in codec.parameters():
        p.requires_grad_(False)
    if stage == 1:
        trainable = list(codec.scorer.parameters())
    elif stage == 2:
        trainable = list(codec.parameters())
    elif stage == 3:
        trainable = list(codec.adapters.task_parameters(task))
    else:
        raise ConfigurationError(f"stage must be 1, 2 or 3, got {stage}")
    for p in trainable:
        p.requires_grad_(True)
    return trainable


def check_prerequisite(stage: int, prev_stage: int | None) -> None:
    if stage == 2 and prev_stage != 1:
        raise ConfigurationError(
            f"stage 2 needs a stage-1 checkpoint to start from, got stage {prev_stage}"
        )
    if stage == 3 and prev_stage != 2:
        raise ConfigurationError(
            f"stage 3 needs a stage-2 checkpoint to start from, got stage {prev_stage}"
        )


@torch.no_grad()
def _precompute_features(task_model: TaskClassifier, images: torch.Tensor,
                         batch: int) -> torch.Tensor:
    out = [task_model.features(images[lo:lo + batch]) for lo in range(0, len(images), batch)]
    return torch.cat(out, dim=0)


@torch.no_grad()
def evaluate_codec(
    codec: ImageCodec,
    task_model: TaskClassifier,
    images: torch.Tensor,
    labels: torch.Tensor,
    task: str,
    batch: int = 128,
) -> tuple[float, float]:
    """(accuracy on reconstructions, mean bpp) with eval-mode coding."""
    hits, bits, pixels = 0, 0.0, 0
    for lo in range(0, len(images), batch):
        chunk = images[lo:lo + batch]
        recon, report, _, _ = codec.simulate(chunk, task=task)
        logits = task_model(recon)
        hits += int((logits.argmax(dim=1) == labels[lo:lo + batch]).sum())
        bits += report.total_bits
        pixels += chunk.shape[0] * chunk.shape[-2] * chunk.shape[-1]
    return hits / len(images), bits / pixels


def train_stage(
    codec: ImageCodec,
    task_model: TaskClassifier,
    cfg: TrainConfig,
    prev_stage: int | None = None,
    out_dir: str | Path | None = None,
) -> dict:
    """Run one stage; mutates the codec in place and returns checkpoint meta."""
    check_prerequisite(cfg.stage, prev_stage)
    if cfg.task not in codec.adapters.tasks:
        raise ConfigurationError(
            f"task {cfg.task!r} is not registered on this codec; "
            f"registered: {codec.adapters.tasks}"
        )
    if cfg.stage == 2 and codec.group_spec.permutation is not None:
        # Fold the recorded ranking into the encoder wiring (an exact channel
        # relabeling) so stage 2 starts with channels already emitted in
        # importance order; the order penalty then only has to keep per-image
        # weights sorted instead of re-learning channel placement from scratch.
        codec.bake_permutation()

    # Gaussian-window tails produce subnormal floats whose microcoded
    # arithmetic can slow epochs by an order of magnitude on x86; flushing
    # them to zero is safe here because the likelihood floor (2^-16) sits
    # thirty orders of magnitude above the subnormal range.
    torch.set_flush_denormal(True)

    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    trainable = apply_stage_freeze(codec, cfg.stage, cfg.task)
    opt = torch.optim.Adam(trainable, lr=cfg.lr, weight_decay=cfg.weight_decay)
    scheduler = (torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=cfg.epochs)
                 if cfg.cosine_lr else None)
    weights = cfg.loss_weights

    images, labels = make_dataset(cfg.task, cfg.n_train, cfg.data_seed)
    val_images, val_labels = make_dataset(cfg.task, cfg.n_val, cfg.data_seed + 1)
    feats_ref = _precompute_features(task_model, images, cfg.eval_batch)

    csv_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / f"metrics_stage{cfg.stage}.csv"

    rows: list[dict] = []
    codec.train()
    for epoch in range(cfg.epochs):
        order = rng.permutation(cfg.n_train)
        sums: dict[str, float] = {}
        steps = 0
        for lo in range(0, cfg.n_train, cfg.batch_size):
            sel = order[lo:lo + cfg.batch_size]
            batch = images[sel]
            out = codec(batch, task=cfg.task)
            feat_hat = task_model.features(out.reconstruction)
            if cfg.stage == 1:
                loss, parts = basic_loss(
                    feats_ref[sel], feat_hat, out.bpp_latent, out.bpp_hyper, weights
                )
            else:
                # The order penalty acts on the scorer's pre-squash logits:
                # the squash is strictly monotone, so the set of ascending
                # adjacent pairs is identical, but a weight parked at 0 or 1
                # would otherwise stop producing gradient and freeze whatever
                # mis-ordering the rate/distortion pull left behind.
                loss, parts = total_loss(
                    feats_ref[sel], feat_hat, out.bpp_latent, out.bpp_hyper,
                    out.channel_logits, out.encoder_gammas, weights,
                )
            opt.zero_grad()
            loss.backward()
            if cfg.clip_norm:
                torch.nn.utils.clip_grad_norm_(trainable, cfg.clip_norm)
            opt.step()
            parts["loss"] = float(loss.detach())
            for k, v in parts.items():
                sums[k] = sums.get(k, 0.0) + v
            steps += 1

        codec.eval()
        val_acc, val_bpp = evaluate_codec(
            codec, task_model, val_images, val_labels, cfg.task, cfg.eval_batch
        )
        codec.train()
        row = {k: sums.get(k, 0.0) / steps for k in
               ("loss", "mse", "bpp_latent", "bpp_hyper", "order_channels", "order_adapters")}
        row["epoch"] = epoch
        row["val_accuracy"] = val_acc
        row["val_bpp"] = val_bpp
        rows.append(row)
        if csv_path is not None:
            _write_metrics(csv_path, rows)
        if scheduler is not None:
            scheduler.step()

    codec.eval()
    meta = {
        "stage": cfg.stage,
        "task": cfg.task,
        "lam": cfg.lam,
        "epochs": cfg.epochs,
        "seed": cfg.seed,
        "final": rows[-1] if rows else {},
    }
    if cfg.stage == 1:
        # rank channels by dataset-mean importance so this checkpoint codes
        # its important channels into the early groups
        with torch.no_grad():
            latents, _ = codec.analyze(val_images[: min(len(val_images), 256)], task=cfg.task)
        mw = mean_weights(codec.scorer, latents)
        permutation = tuple(int(i) for i in rank_channels(mw))
        codec.set_group_spec(codec.group_spec.with_permutation(permutation))
        meta["mean_channel_weights"] = [float(v) for v in mw]
    return meta


def _write_metrics(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRIC_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in METRIC_FIELDS})
