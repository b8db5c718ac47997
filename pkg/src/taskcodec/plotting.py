"""Static figures for probe and evaluation outputs.

Each function renders one PNG next to the CSV it visualizes and returns the
path.  The Agg backend is forced so plotting works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finish(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_distortion(rows: list[dict], path: str | Path) -> Path:
    """Per-unit accuracy bars against the unperturbed baseline."""
    units = [r["unit"] for r in rows]
    acc = [r["accuracy"] for r in rows]
    baseline = rows[0]["baseline"] if rows else 0.0
    mode = rows[0]["mode"] if rows else "?"
    fig, ax = plt.subplots(figsize=(8, 3.2))
    ax.bar(units, acc, color="#4878cf", width=0.8)
    ax.axhline(baseline, color="#d65f5f", linestyle="--", label=f"baseline {baseline:.3f}")
    ax.set_xlabel("perturbed unit")
    ax.set_ylabel("task accuracy")
    ax.set_title(f"accuracy under per-unit {mode} perturbation")
    ax.set_ylim(0, 1)
    ax.legend(loc="lower right")
    return _finish(fig, path)


def plot_removal(study: dict, path: str | Path) -> Path:
    """Importance-ordered removal curve against the random-order mean."""
    fig, ax = plt.subplots(figsize=(6.4, 4))
    for run in study.get("random_runs", []):
        ax.plot([r["k"] for r in run], [r["accuracy"] for r in run],
                color="#cccccc", linewidth=0.8, zorder=1)
    for key, color, label in (
        ("random", "#d65f5f", "random order (mean)"),
        ("importance", "#4878cf", "least-important first"),
    ):
        rows = study[key]
        ax.plot([r["k"] for r in rows], [r["accuracy"] for r in rows],
                color=color, linewidth=2, label=label, zorder=2)
    ax.set_xlabel("channels removed")
    ax.set_ylabel("task accuracy")
    ax.set_title(
        "removal curves (area %.2f vs %.2f)"
        % (study["auc_importance"], study["auc_random"])
    )
    ax.legend(loc="lower left")
    return _finish(fig, path)


def plot_sweep(result: dict, path: str | Path) -> Path:
    """Prior movement and accuracy over the swept scale grid, with fits."""
    acc_rows = result["accuracy_rows"]
    swept = acc_rows[0]["swept_group"] if acc_rows else 0
    own = [r for r in result["prior_rows"] if r["group"] == swept]
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.6))

    for ax, rows, field in ((axes[0], own, "prior_mse"), (axes[1], acc_rows, "accuracy")):
        xs = np.array([r["x"] for r in rows])
        ys = np.array([r[field] for r in rows])
        ax.plot(xs, ys, "o", color="#4878cf", label="measured")
        fit = result["fits"][field]
        grid = np.linspace(xs.min(), xs.max(), 200)
        ax.plot(grid, np.polyval(fit.coeffs, grid), "-", color="#d65f5f",
                label=f"fit (cc {fit.cc:.3f})")
        ax.set_xlabel("axis (1/s or log10 s)")
        ax.set_ylabel(field.replace("_", " "))
        ax.legend(loc="best")
    axes[0].set_title(f"group {swept} prior movement")
    axes[1].set_title(f"group {swept} accuracy response")
    return _finish(fig, path)


def plot_rate_accuracy(curves: list, path: str | Path) -> Path:
    """bpp-accuracy points per labeled curve."""
    fig, ax = plt.subplots(figsize=(6.4, 4))
    for curve in curves:
        ax.plot(curve.bpp, curve.accuracy, "o-", label=curve.label)
    ax.set_xlabel("bits per pixel")
    ax.set_ylabel("task accuracy")
    ax.set_title("rate-accuracy")
    ax.legend(loc="lower right")
    return _finish(fig, path)


def plot_metrics(rows: list[dict], path: str | Path) -> Path:
    """Training curves: loss and rate terms per epoch."""
    epochs = [r["epoch"] for r in rows]
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.6))
    axes[0].plot(epochs, [r["loss"] for r in rows], label="loss")
    axes[0].plot(epochs, [r["mse"] for r in rows], label="mse")
    axes[0].set_xlabel("epoch")
    axes[0].legend(loc="upper right")
    axes[1].plot(epochs, [r["bpp_latent"] for r in rows], label="bpp latent")
    axes[1].plot(epochs, [r["bpp_hyper"] for r in rows], label="bpp hyper")
    axes[1].plot(epochs, [r["val_accuracy"] for r in rows], label="val accuracy")
    axes[1].set_xlabel("epoch")
    axes[1].legend(loc="center right")
    return _finish(fig, path)
