"""Reference training pack for the trained-outcome acceptance checks.

Training a codec ladder takes tens of minutes on one CPU core, so the
acceptance suite shares one cached pack: a frozen task classifier, the stage-1
checkpoint, one stage-2 checkpoint per ladder lambda, and a summary of the
measurements taken along the way.  The pack lives under .cache/reference/
keyed by a hash of the recipe below; any recipe change invalidates the cache
and the next run retrains.

Set TASKCODEC_REFERENCE to point at an existing pack directory (the one
holding summary.json) to reuse it across checkouts.
"""

from __future__ import annotations

import json
import os
import time
from pathlib import Path

import torch

from taskcodec.codec import ImageCodec, load_checkpoint, save_checkpoint
from taskcodec.config import config_hash
from taskcodec.importance import order_violation_fraction
from taskcodec.probes import removal_study
from taskcodec.tasknet import accuracy, load_task_model, make_dataset, save_task_model, \
    train_task_model
from taskcodec.training import TrainConfig, evaluate_codec, train_stage

REFERENCE_ENV = "TASKCODEC_REFERENCE"
EVAL_SEED = 101  # matches the CLI's held-out diagnostic seed

RECIPE: dict = {
    "task": "shape",
    "model": {"latent_channels": 48, "hidden": 64, "hyper_channels": 32},
    "task_model": {"n_train": 2048, "epochs": 24, "batch_size": 64,
                   "lr": 4e-3, "seed": 7},
    "stage1": {"epochs": 6, "lr": 1e-3, "batch_size": 16, "n_train": 384,
               "lam": 1.0},
    "stage2": {"epochs": 180, "lr": 1e-3, "batch_size": 16, "n_train": 512,
               "clip_norm": 2.0, "cosine_lr": True},
    "lambdas": [2.0, 1.0, 0.5, 0.2],
    "eval_images": 256,
    "removal_seeds": [0, 1, 2, 3, 4],
    "seed": 0,
}


def recipe_hash() -> str:
    return config_hash(RECIPE)


def reference_dir() -> Path:
    env = os.environ.get(REFERENCE_ENV)
    if env:
        return Path(env)
    return Path(__file__).resolve().parents[2] / ".cache" / "reference" / recipe_hash()


def _lam_name(lam: float) -> str:
    return f"stage2_lam{lam:g}.pt"


@torch.no_grad()
def emitted_violations(codec: ImageCodec, images: torch.Tensor, task: str) -> float:
    """Mean adjacent-violation fraction of the emitted channel weights."""
    codec.eval()
    latent, _ = codec.analyze(images, task=task)
    weights = codec.scorer.score(latent)
    return order_violation_fraction(weights)


def train_reference(out_dir: Path) -> dict:
    """Train the full pack into out_dir and return the measurement summary."""
    out_dir.mkdir(parents=True, exist_ok=True)
    task = RECIPE["task"]
    summary: dict = {"recipe": RECIPE, "recipe_hash": recipe_hash(), "timings": {}}
    t_all = time.time()

    t0 = time.time()
    tm_cfg = RECIPE["task_model"]
    task_model = train_task_model(task, **tm_cfg)
    save_task_model(out_dir / f"task_{task}.pt", task_model)
    val_images, val_labels = make_dataset(task, RECIPE["eval_images"], EVAL_SEED)
    summary["clean_accuracy"] = accuracy(task_model, val_images, val_labels)
    summary["timings"]["task_model"] = round(time.time() - t0, 1)
    print(f"task model: clean accuracy {summary['clean_accuracy']:.4f} "
          f"({summary['timings']['task_model']}s)", flush=True)

    torch.manual_seed(RECIPE["seed"])
    codec = ImageCodec(**RECIPE["model"])
    codec.adapters.register_task(task)
    summary["violations_init"] = emitted_violations(codec, val_images[:128], task)
    print(f"violations at stage-1 init: {summary['violations_init']:.4f}", flush=True)

    t0 = time.time()
    s1 = TrainConfig(stage=1, task=task, **RECIPE["stage1"])
    meta1 = train_stage(codec, task_model, s1, prev_stage=None, out_dir=out_dir)
    save_checkpoint(out_dir / "stage1.pt", codec, meta1)
    summary["timings"]["stage1"] = round(time.time() - t0, 1)
    print(f"stage 1 done ({summary['timings']['stage1']}s)", flush=True)

    ladder = []
    summary["violations_after"] = {}
    for lam in RECIPE["lambdas"]:
        t0 = time.time()
        (codec, _), = [load_checkpoint(out_dir / "stage1.pt")]
        s2 = TrainConfig(stage=2, task=task, lam=lam, **RECIPE["stage2"])
        meta2 = train_stage(codec, task_model, s2, prev_stage=1,
                            out_dir=out_dir / f"lam{lam:g}")
        save_checkpoint(out_dir / _lam_name(lam), codec, meta2)
        acc, bpp = evaluate_codec(codec, task_model, val_images, val_labels, task)
        viol = emitted_violations(codec, val_images[:128], task)
        summary["violations_after"][f"{lam:g}"] = viol
        ladder.append({"lambda": lam, "bpp": bpp, "accuracy": acc})
        summary["timings"][f"stage2_lam{lam:g}"] = round(time.time() - t0, 1)
        print(f"lambda {lam:g}: bpp {bpp:.4f}, accuracy {acc:.4f}, "
              f"violations {viol:.4f} ({summary['timings'][f'stage2_lam{lam:g}']}s)",
              flush=True)
    summary["ladder"] = ladder

    t0 = time.time()
    (codec, _), = [load_checkpoint(out_dir / _lam_name(1.0))]
    study = removal_study(codec, task_model, val_images, val_labels, task,
                          seeds=RECIPE["removal_seeds"])
    summary["auc_importance"] = study["auc_importance"]
    summary["auc_random"] = study["auc_random"]
    summary["timings"]["removal"] = round(time.time() - t0, 1)
    rel = (study["auc_importance"] / study["auc_random"] - 1.0) * 100
    print(f"removal study: importance {study['auc_importance']:.4f} vs "
          f"random {study['auc_random']:.4f} ({rel:+.1f}%)", flush=True)

    summary["timings"]["total"] = round(time.time() - t_all, 1)
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1)
    print(f"pack complete in {summary['timings']['total']}s -> {out_dir}", flush=True)
    return summary


def ensure_reference() -> tuple[Path, dict]:
    """Return (pack directory, summary), training the pack if it is missing."""
    out_dir = reference_dir()
    summary_path = out_dir / "summary.json"
    if summary_path.exists():
        with open(summary_path) as fh:
            summary = json.load(fh)
        if summary.get("recipe_hash") == recipe_hash():
            return out_dir, summary
    summary = train_reference(out_dir)
    return out_dir, summary


def load_pack(out_dir: Path):
    """Load (task_model, {lambda: (codec, meta)}) from a pack directory."""
    task = RECIPE["task"]
    task_model = load_task_model(out_dir / f"task_{task}.pt")
    models = {}
    for lam in RECIPE["lambdas"]:
        models[lam] = load_checkpoint(out_dir / _lam_name(lam))
    return task_model, models
