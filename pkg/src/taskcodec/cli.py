"""Command-line entry point.

Commands
    train          run one training stage and save a checkpoint
    probe          per-channel/group distortion probe (CSV + figure)
    removal-curve  importance-vs-random channel removal study (CSV + figure)
    sweep-scales   quantization-scale sweep with quadratic fits (CSV + figure)
    encode         compress an image (--simulate for rate report, --real for bytes)
    decode         decompress a stream back to an image
    eval           rate-accuracy curve over one or more checkpoints (CSV + figure)
    bd             delta accuracy between two curve CSVs
    inspect        describe a checkpoint, stream, or curve CSV

Every command accepts --config FILE (INI, sections documented in config.py)
plus flag overrides, and writes outputs under a run directory with a
manifest.json recording the merged config hash, seed, inputs, and command
line.  The default run root is ./runs, overridable via the TASKCODEC_RUNS
environment variable.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import torch

from taskcodec import bd as bdmod
from taskcodec import container
from taskcodec.codec import ImageCodec, load_checkpoint, save_checkpoint
from taskcodec.config import config_hash, load_config, parse_number_list
from taskcodec.errors import ConfigurationError, TaskCodecError
from taskcodec.grouping import GroupSpec, default_group_spec
from taskcodec.probes import distortion_probe, removal_study, sweep_scale
from taskcodec.runs import create_run_dir, write_csv, write_manifest
from taskcodec.tasknet import (
    TASKS,
    load_task_model,
    make_dataset,
    save_task_model,
    train_task_model,
)
from taskcodec.training import TrainConfig, evaluate_codec, train_stage

# Held-out data seed for every diagnostic command (probe/removal/sweep/eval);
# training uses [training] data_seed, so diagnostics never reuse training data.
EVAL_DATA_SEED = 101


# ---- small helpers ----------------------------------------------------------

def _require_file(path: str | None, flag: str, hint: str) -> Path:
    if path is None:
        raise ConfigurationError(f"missing {flag}; {hint}")
    p = Path(path)
    if not p.exists():
        raise ConfigurationError(f"{flag} file not found: {p}; {hint}")
    return p


def _read_image(path: Path) -> torch.Tensor:
    from PIL import Image

    img = Image.open(path).convert("RGB")
    arr = np.asarray(img, dtype=np.float32) / 255.0
    return torch.from_numpy(arr).permute(2, 0, 1).unsqueeze(0)


def _write_image(path: Path, tensor: torch.Tensor) -> None:
    from PIL import Image

    arr = tensor.detach().clamp(0, 1)[0].permute(1, 2, 0).numpy()
    Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8)).save(path)


def _model_spec(model_cfg: dict) -> GroupSpec | None:
    sizes = parse_number_list(model_cfg["group_sizes"], int)
    scales = parse_number_list(model_cfg["scale_table"], float)
    if not sizes and not scales:
        return None
    if sizes and not scales:
        base = default_group_spec(sum(sizes))
        return GroupSpec(sizes, base.scales)
    if scales and not sizes:
        base = default_group_spec(model_cfg["latent_channels"])
        return GroupSpec(base.sizes, scales)
    return GroupSpec(sizes, scales)


def _build_codec(model_cfg: dict) -> ImageCodec:
    return ImageCodec(
        latent_channels=model_cfg["latent_channels"],
        hidden=model_cfg["hidden"],
        hyper_channels=model_cfg["hyper_channels"],
        group_spec=_model_spec(model_cfg),
        adapter_reduction=model_cfg["adapter_reduction"],
        scorer_bypass=model_cfg["scorer_bypass"],
    )


def _load_codec(path: str | None):
    p = _require_file(path, "--checkpoint", "pass a checkpoint produced by `train`")
    return load_checkpoint(p), p


def _task_model(args, cfg, task: str, run_dir: Path):
    """Load the frozen classifier, or train and save one into the run."""
    if args.task_model is not None:
        return load_task_model(_require_file(
            args.task_model, "--task-model", "pass a classifier saved by `train`"
        )), Path(args.task_model)
    tm_cfg = cfg["task_model"]
    print(f"training task model for {task!r} "
          f"({tm_cfg['n_train']} samples, {tm_cfg['epochs']} epochs)")
    model = train_task_model(
        task, n_train=tm_cfg["n_train"], epochs=tm_cfg["epochs"],
        batch_size=tm_cfg["batch_size"], lr=tm_cfg["lr"], seed=tm_cfg["seed"],
    )
    path = run_dir / f"task_{task}.pt"
    save_task_model(path, model)
    print(f"saved task model to {path}")
    return model, path


def _overrides(args, mapping: dict[tuple[str, str], str]) -> dict:
    out: dict[str, dict] = {}
    for (section, key), attr in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            out.setdefault(section, {})[key] = value
    return out


def _resolve_task(args, meta: dict) -> str:
    if getattr(args, "task", None):
        return args.task
    task = meta.get("task")
    if not task:
        raise ConfigurationError(
            "checkpoint does not record a task; pass --task explicitly"
        )
    return task


# ---- commands ---------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = load_config(args.config, _overrides(args, {
        ("training", "stage"): "stage",
        ("training", "task"): "task",
        ("training", "lambda"): "lam",
        ("training", "epochs"): "epochs",
        ("training", "lr"): "lr",
        ("training", "batch_size"): "batch_size",
        ("training", "seed"): "seed",
        ("training", "n_train"): "n_train",
        ("training", "n_val"): "n_val",
        ("model", "group_sizes"): "group_spec",
        ("model", "scale_table"): "scale_table",
    }))
    tr = cfg["training"]
    stage, task = tr["stage"], tr["task"]
    run_dir = create_run_dir(f"train-stage{stage}-{task}", args.out)

    inputs: dict[str, Path] = {}
    if stage == 1:
        if args.checkpoint is not None:
            raise ConfigurationError("stage 1 starts from scratch; drop --checkpoint")
        codec = _build_codec(cfg["model"])
        codec.adapters.register_task(task)
        prev_stage = None
    else:
        (codec, meta), ckpt_path = _load_codec(args.checkpoint)
        inputs["checkpoint"] = ckpt_path
        prev_stage = meta.get("stage")
        if stage == 3 and task not in codec.adapters.tasks:
            codec.adapters.register_task(task, clone_of=args.clone_from)

    task_model, tm_path = _task_model(args, cfg, task, run_dir)
    inputs["task_model"] = tm_path

    tcfg = TrainConfig(
        stage=stage, task=task, lam=tr["lambda"],
        phi_adapters=tr["phi_adapters"], phi_channels=tr["phi_channels"],
        epochs=tr["epochs"] or None, lr=tr["lr"] or None,
        batch_size=tr["batch_size"] or None,
        n_train=tr["n_train"], n_val=tr["n_val"],
        data_seed=tr["data_seed"], seed=tr["seed"], eval_batch=tr["eval_batch"],
        clip_norm=tr["clip_norm"], cosine_lr=tr["cosine_lr"],
    )
    print(f"stage {stage} on task {task!r}: {tcfg.epochs} epochs, "
          f"lr {tcfg.lr}, batch {tcfg.batch_size}, lambda {tcfg.lam}")
    meta = train_stage(codec, task_model, tcfg, prev_stage=prev_stage, out_dir=run_dir)

    ckpt = run_dir / "checkpoint.pt"
    save_checkpoint(ckpt, codec, meta)
    try:
        from taskcodec.plotting import plot_metrics
        import csv as _csv

        with open(run_dir / f"metrics_stage{stage}.csv") as fh:
            rows = [{k: float(v) for k, v in r.items() if v != ""}
                    for r in _csv.DictReader(fh)]
        plot_metrics(rows, run_dir / f"metrics_stage{stage}.png")
    except Exception as exc:  # plotting must never fail the run
        print(f"note: metrics figure skipped ({exc})")

    write_manifest(run_dir, "train", cfg, config_hash(cfg), seed=tr["seed"],
                   inputs=inputs, extra={"checkpoint_meta": {
                       k: v for k, v in meta.items() if k != "mean_channel_weights"}})
    final = meta.get("final", {})
    print(f"saved checkpoint to {ckpt}")
    if final:
        print("final epoch: " + ", ".join(
            f"{k}={final[k]:.4f}" for k in ("loss", "mse", "bpp_latent", "val_accuracy")
            if k in final))
    return 0


def cmd_probe(args) -> int:
    cfg = load_config(args.config, _overrides(args, {
        ("probe", "mode"): "mode",
        ("probe", "intensity"): "intensity",
        ("probe", "group_size"): "group_size",
        ("probe", "n_images"): "n_images",
        ("probe", "seed"): "seed",
        ("probe", "batch"): "batch",
    }))
    pc = cfg["probe"]
    (codec, meta), ckpt_path = _load_codec(args.checkpoint)
    task = _resolve_task(args, meta)
    run_dir = create_run_dir(f"probe-{pc['mode']}", args.out)
    task_model, tm_path = _task_model(args, cfg, task, run_dir)

    images, labels = make_dataset(task, pc["n_images"], EVAL_DATA_SEED)
    rows = distortion_probe(
        codec, task_model, images, labels, task,
        mode=pc["mode"], intensity=pc["intensity"],
        group_size=pc["group_size"], seed=pc["seed"], batch=pc["batch"],
    )
    csv_path = write_csv(run_dir / "probe.csv", rows,
                         ["unit", "lo", "hi", "mode", "intensity", "accuracy", "baseline"])
    from taskcodec.plotting import plot_distortion

    fig_path = plot_distortion(rows, run_dir / "probe.png")
    write_manifest(run_dir, "probe", cfg, config_hash(cfg), seed=pc["seed"],
                   inputs={"checkpoint": ckpt_path, "task_model": tm_path})
    worst = min(rows, key=lambda r: r["accuracy"])
    print(f"baseline accuracy {rows[0]['baseline']:.4f}; "
          f"worst unit {worst['unit']} at {worst['accuracy']:.4f}")
    print(f"wrote {csv_path} and {fig_path}")
    return 0


def cmd_removal_curve(args) -> int:
    cfg = load_config(args.config, _overrides(args, {
        ("removal", "seeds"): "seeds",
        ("removal", "n_images"): "n_images",
        ("removal", "batch"): "batch",
    }))
    rc = cfg["removal"]
    seeds = parse_number_list(rc["seeds"], int)
    if not seeds:
        raise ConfigurationError("removal needs at least one random-order seed")
    (codec, meta), ckpt_path = _load_codec(args.checkpoint)
    task = _resolve_task(args, meta)
    run_dir = create_run_dir("removal", args.out)
    task_model, tm_path = _task_model(args, cfg, task, run_dir)

    images, labels = make_dataset(task, rc["n_images"], EVAL_DATA_SEED)
    study = removal_study(codec, task_model, images, labels, task,
                          seeds=seeds, batch=rc["batch"])
    rows = []
    for r in study["importance"]:
        rows.append({"k": r["k"], "ordering": "importance", "accuracy": r["accuracy"]})
    for r in study["random"]:
        rows.append({"k": r["k"], "ordering": "random_mean", "accuracy": r["accuracy"]})
    for seed, run in zip(seeds, study["random_runs"]):
        for r in run:
            rows.append({"k": r["k"], "ordering": f"random_{seed}", "accuracy": r["accuracy"]})
    csv_path = write_csv(run_dir / "removal.csv", rows, ["k", "ordering", "accuracy"])
    from taskcodec.plotting import plot_removal

    fig_path = plot_removal(study, run_dir / "removal.png")
    write_manifest(run_dir, "removal-curve", cfg, config_hash(cfg),
                   inputs={"checkpoint": ckpt_path, "task_model": tm_path},
                   extra={"auc_importance": study["auc_importance"],
                          "auc_random": study["auc_random"]})
    rel = (study["auc_importance"] / study["auc_random"] - 1.0) * 100 \
        if study["auc_random"] else float("nan")
    print(f"area under curve: importance {study['auc_importance']:.3f}, "
          f"random mean {study['auc_random']:.3f} ({rel:+.1f}% relative)")
    print(f"wrote {csv_path} and {fig_path}")
    return 0


def cmd_sweep_scales(args) -> int:
    cfg = load_config(args.config, _overrides(args, {
        ("sweep", "group_index"): "group_index",
        ("sweep", "grid"): "grid",
        ("sweep", "n_images"): "n_images",
        ("sweep", "batch"): "batch",
    }))
    sc = cfg["sweep"]
    grid = parse_number_list(sc["grid"], float)
    if len(grid) < 3:
        raise ConfigurationError(
            "sweep needs --grid with at least 3 comma-separated scales, "
            f"got {sc['grid']!r}"
        )
    (codec, meta), ckpt_path = _load_codec(args.checkpoint)
    task = _resolve_task(args, meta)
    run_dir = create_run_dir(f"sweep-g{sc['group_index']}", args.out)
    task_model, tm_path = _task_model(args, cfg, task, run_dir)

    images, labels = make_dataset(task, sc["n_images"], EVAL_DATA_SEED)
    result = sweep_scale(codec, task_model, images, labels, task,
                         sc["group_index"], grid, batch=sc["batch"])
    prior_csv = write_csv(run_dir / "sweep_prior.csv", result["prior_rows"],
                          ["swept_group", "group", "scale", "x", "prior_mse"])
    acc_csv = write_csv(run_dir / "sweep_accuracy.csv", result["accuracy_rows"],
                        ["swept_group", "scale", "x", "accuracy", "bpp"])
    from taskcodec.plotting import plot_sweep

    fig_path = plot_sweep(result, run_dir / "sweep.png")
    fits = {name: {"coeffs": list(fit.coeffs), "vertex": fit.vertex,
                   "cc": fit.cc, "rmse": fit.rmse}
            for name, fit in result["fits"].items()}
    write_manifest(run_dir, "sweep-scales", cfg, config_hash(cfg),
                   inputs={"checkpoint": ckpt_path, "task_model": tm_path},
                   extra={"fits": fits})
    for name, fit in result["fits"].items():
        kind = "argmax" if fit.concave else "argmin"
        print(f"{name}: fit a={fit.coeffs[0]:.5g} b={fit.coeffs[1]:.5g} "
              f"c={fit.coeffs[2]:.5g}, {kind} at x={fit.vertex:.5g}, "
              f"cc={fit.cc:.4f}, rmse={fit.rmse:.5g}")
    print(f"wrote {prior_csv}, {acc_csv} and {fig_path}")
    return 0


def cmd_encode(args) -> int:
    cfg = load_config(args.config)
    image_path = _require_file(args.image, "image", "pass a PNG to compress")
    (codec, meta), ckpt_path = _load_codec(args.checkpoint)
    task = _resolve_task(args, meta)
    lam = args.lam if args.lam is not None else float(meta.get("lam", 0.0))
    image = _read_image(image_path)
    run_dir = create_run_dir("encode", args.out)

    if args.real:
        stream, recon = codec.compress(image, task=task, lam=lam)
        out_path = run_dir / (image_path.stem + ".tcs")
        out_path.write_bytes(stream)
        n_pixels = image.shape[-2] * image.shape[-1]
        print(f"wrote {out_path}: {len(stream)} bytes "
              f"({len(stream) * 8 / n_pixels:.4f} bpp) for task {task!r}")
    else:
        recon, report, _, _ = codec.simulate(image, task=task)
        for line in report.lines(codec.group_spec):
            print(line)
    recon_path = run_dir / (image_path.stem + ".recon.png")
    _write_image(recon_path, recon)
    write_manifest(run_dir, "encode", cfg, config_hash(cfg),
                   inputs={"checkpoint": ckpt_path, "image": image_path})
    print(f"wrote {recon_path}")
    return 0


def cmd_decode(args) -> int:
    cfg = load_config(args.config)
    stream_path = _require_file(args.stream, "stream", "pass a stream written by `encode --real`")
    (codec, _), ckpt_path = _load_codec(args.checkpoint)
    recon, header = codec.decompress(stream_path.read_bytes())
    run_dir = create_run_dir("decode", args.out)
    out_path = run_dir / (stream_path.stem + ".png")
    _write_image(out_path, recon)
    write_manifest(run_dir, "decode", cfg, config_hash(cfg),
                   inputs={"checkpoint": ckpt_path, "stream": stream_path})
    print(f"{header.height}x{header.width}, {header.spec.n_groups} groups, "
          f"task {header.task!r}, lambda {header.lam}")
    print(f"wrote {out_path}")
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args.config, _overrides(args, {
        ("eval", "n_images"): "n_images",
        ("eval", "batch"): "batch",
        ("eval", "label"): "label",
    }))
    ec = cfg["eval"]
    if not args.checkpoints:
        raise ConfigurationError("pass one or more checkpoints to evaluate")
    run_dir = create_run_dir("eval", args.out)

    rows, inputs = [], {}
    task_model = None
    for i, ckpt in enumerate(args.checkpoints):
        (codec, meta), ckpt_path = _load_codec(ckpt)
        inputs[f"checkpoint_{i}"] = ckpt_path
        task = _resolve_task(args, meta)
        if task_model is None:
            task_model, tm_path = _task_model(args, cfg, task, run_dir)
            inputs["task_model"] = tm_path
        images, labels = make_dataset(task, ec["n_images"], EVAL_DATA_SEED)
        acc, bpp = evaluate_codec(codec, task_model, images, labels, task,
                                  batch=ec["batch"])
        lam = float(meta.get("lam", 0.0))
        rows.append({"label": ec["label"], "lambda": lam, "bpp": bpp, "accuracy": acc})
        print(f"{ckpt_path}: lambda {lam}, bpp {bpp:.4f}, accuracy {acc:.4f}")

    rows.sort(key=lambda r: r["bpp"])
    csv_path = write_csv(run_dir / "curve.csv", rows,
                         ["label", "lambda", "bpp", "accuracy"])
    fig_path = None
    if len(rows) >= bdmod.MIN_POINTS:
        from taskcodec.plotting import plot_rate_accuracy

        curve = bdmod.build_curve(
            ec["label"], [(r["lambda"], r["bpp"], r["accuracy"]) for r in rows]
        )
        fig_path = plot_rate_accuracy([curve], run_dir / "rate_accuracy.png")
    write_manifest(run_dir, "eval", cfg, config_hash(cfg), inputs=inputs)
    print(f"wrote {csv_path}" + (f" and {fig_path}" if fig_path else ""))
    return 0


def cmd_bd(args) -> int:
    test_path = _require_file(args.test, "--test", "a curve CSV written by `eval`")
    anchor_path = _require_file(args.anchor, "--anchor", "a curve CSV written by `eval`")
    test = bdmod.read_curve_csv(test_path)
    anchor = bdmod.read_curve_csv(anchor_path)
    delta = bdmod.bd_accuracy(test, anchor)
    lo = max(min(test.bpp), min(anchor.bpp))
    hi = min(max(test.bpp), max(anchor.bpp))
    print(f"test {test.label!r} ({len(test.bpp)} points) vs "
          f"anchor {anchor.label!r} ({len(anchor.bpp)} points)")
    print(f"rate overlap [{lo:.4f}, {hi:.4f}] bpp")
    print(f"delta accuracy: {delta:.6f}")
    return 0


def cmd_inspect(args) -> int:
    path = _require_file(args.target, "target", "a checkpoint, stream, or curve CSV")
    suffix = path.suffix.lower()
    if suffix in (".pt", ".pth"):
        (codec, meta), _ = _load_codec(str(path))
        spec = codec.group_spec
        print(f"checkpoint {path}")
        print(f"  latent channels {codec.latent_channels}, "
              f"hyper channels {codec.hyper_channels}, hidden {codec.hidden}")
        print(f"  groups: sizes {list(spec.sizes)}, scales "
              f"{[round(s, 4) for s in spec.scales]}")
        print(f"  permutation: {'stored' if spec.permutation is not None else 'identity'}")
        print(f"  tasks: {codec.adapters.tasks}")
        print(f"  meta: {meta}")
    elif suffix == ".csv":
        curve = bdmod.read_curve_csv(path)
        print(f"curve {curve.label!r}: {len(curve.bpp)} points, "
              f"bpp [{min(curve.bpp):.4f}, {max(curve.bpp):.4f}], "
              f"accuracy [{min(curve.accuracy):.4f}, {max(curve.accuracy):.4f}]")
    else:
        header, segments = container.unpack(path.read_bytes())
        print(f"stream {path}: {path.stat().st_size} bytes")
        print(f"  image {header.height}x{header.width}, task {header.task!r}, "
              f"lambda {header.lam}")
        print(f"  groups: sizes {list(header.spec.sizes)}, scales "
              f"{[round(s, 4) for s in header.spec.scales]}")
        sizes = ", ".join(str(len(s)) for s in segments)
        print(f"  segments (hyper + {len(segments) - 1} groups): {sizes} bytes")
    return 0


# ---- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taskcodec",
        description="Task-aware learned image codec: training, probing, coding.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, checkpoint=True, task_model=False):
        p.add_argument("--config", help="INI config file")
        p.add_argument("--out", help="output directory (default: new dir under the run root)")
        if checkpoint:
            p.add_argument("--checkpoint", help="model checkpoint (.pt)")
        if task_model:
            p.add_argument("--task-model", dest="task_model",
                           help="frozen classifier (.pt); trained on the fly if omitted")
        p.add_argument("--task", help="task id (default: from the checkpoint)")

    p = sub.add_parser("train", help="run one training stage")
    common(p, task_model=True)
    p.add_argument("--stage", type=int, choices=(1, 2, 3))
    p.add_argument("--lambda", dest="lam", type=float, help="rate weight")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-train", dest="n_train", type=int)
    p.add_argument("--n-val", dest="n_val", type=int)
    p.add_argument("--group-spec", dest="group_spec",
                   help="comma-separated group sizes, e.g. 1,1,2,4,40")
    p.add_argument("--scale-table", dest="scale_table",
                   help="comma-separated group scales, e.g. 1,1.85,2.27,3.71,23988.33")
    p.add_argument("--clone-from", dest="clone_from",
                   help="stage 3: initialize the new task's adapters from this task")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("probe", help="per-unit distortion probe")
    common(p, task_model=True)
    p.add_argument("--mode", choices=("zero", "noise"))
    p.add_argument("--intensity", type=float)
    p.add_argument("--group-size", dest="group_size", type=int)
    p.add_argument("--n-images", dest="n_images", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--batch", type=int)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("removal-curve", help="importance vs random removal study")
    common(p, task_model=True)
    p.add_argument("--seeds", help="comma-separated random-order seeds")
    p.add_argument("--n-images", dest="n_images", type=int)
    p.add_argument("--batch", type=int)
    p.set_defaults(func=cmd_removal_curve)

    p = sub.add_parser("sweep-scales", help="scale sweep with quadratic fits")
    common(p, task_model=True)
    p.add_argument("--group-index", dest="group_index", type=int)
    p.add_argument("--grid", help="comma-separated scales to sweep")
    p.add_argument("--n-images", dest="n_images", type=int)
    p.add_argument("--batch", type=int)
    p.set_defaults(func=cmd_sweep_scales)

    p = sub.add_parser("encode", help="compress an image")
    common(p)
    p.add_argument("image", help="input image (PNG/JPEG, dims divisible by 16)")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--simulate", action="store_true",
                      help="rate report without bytes (default)")
    mode.add_argument("--real", action="store_true", help="write an actual bitstream")
    p.add_argument("--lambda", dest="lam", type=float,
                   help="lambda tag for the header (default: from the checkpoint)")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decompress a stream")
    common(p)
    p.add_argument("stream", help="bitstream written by encode --real")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="rate-accuracy curve over checkpoints")
    p.add_argument("--config", help="INI config file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--task", help="task id (default: from the checkpoints)")
    p.add_argument("--task-model", dest="task_model")
    p.add_argument("--label")
    p.add_argument("--n-images", dest="n_images", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("checkpoints", nargs="+", help="checkpoints, one per lambda")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bd", help="delta accuracy between two curves")
    p.add_argument("--test", required=True, help="curve CSV under test")
    p.add_argument("--anchor", required=True, help="anchor curve CSV")
    p.set_defaults(func=cmd_bd)

    p = sub.add_parser("inspect", help="describe a checkpoint, stream, or curve")
    p.add_argument("target", help="path to a .pt checkpoint, .tcs stream, or .csv curve")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TaskCodecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
