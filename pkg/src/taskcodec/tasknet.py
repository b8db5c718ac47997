"""Synthetic desk-scale vision tasks and their frozen classifiers.

Images are 64x64 glyphs on noisy backgrounds.  Two label functions share the
same images: "shape" is the glyph geometry (6 classes, needs structure and
mid-frequency detail) and "hue" is the glyph colour family (4 classes, needs
colour).  A small CNN per task stands in for the heavyweight detector the
rate-distortion loss would normally tap; its mid-level feature map is the
distortion reference and its parameters are frozen everywhere in this package.
"""

from __future__ import annotations

import colorsys

import numpy as np
import torch
from torch import nn

from taskcodec.errors import ConfigurationError

IMAGE_SIZE = 64
SHAPES = ("circle", "square", "triangle", "hstripes", "vstripes", "checker")
HUE_FAMILIES = ((0.0, "red"), (0.33, "green"), (0.62, "blue"), (0.15, "yellow"))

TASKS = {"shape": len(SHAPES), "hue": len(HUE_FAMILIES)}


def _glyph_mask(shape_id: int, rng: np.random.Generator) -> np.ndarray:
    n = IMAGE_SIZE
    cy, cx = rng.integers(22, n - 22, size=2)
    r = int(rng.integers(12, 19))
    yy, xx = np.mgrid[0:n, 0:n]
    dy, dx = yy - cy, xx - cx
    name = SHAPES[shape_id]
    if name == "circle":
        return (dy * dy + dx * dx) <= r * r
    box = (np.abs(dy) <= r) & (np.abs(dx) <= r)
    if name == "square":
        return box
    if name == "triangle":
        return (dy >= -r) & (dy <= r) & (np.abs(dx) <= (dy + r) / 2.0)
    period = int(rng.integers(4, 8))
    phase = int(rng.integers(0, period))
    if name == "hstripes":
        return box & (((yy + phase) // period) % 2 == 0)
    if name == "vstripes":
        return box & (((xx + phase) // period) % 2 == 0)
    if name == "checker":
        return box & ((((yy + phase) // period) + ((xx + phase) // period)) % 2 == 0)
    raise ConfigurationError(f"unknown shape id {shape_id}")


def generate_sample(rng: np.random.Generator) -> tuple[np.ndarray, int, int]:
    """One image plus its (shape, hue) labels."""
    shape_id = int(rng.integers(0, len(SHAPES)))
    hue_id = int(rng.integers(0, len(HUE_FAMILIES)))

    base_hue, _ = HUE_FAMILIES[hue_id]
    hue = (base_hue + rng.uniform(-0.04, 0.04)) % 1.0
    sat = rng.uniform(0.65, 1.0)
    val = rng.uniform(0.65, 1.0)
    glyph_rgb = np.array(colorsys.hsv_to_rgb(hue, sat, val), dtype=np.float32)

    bg = rng.uniform(0.25, 0.6, size=3).astype(np.float32)
    img = np.empty((3, IMAGE_SIZE, IMAGE_SIZE), dtype=np.float32)
    img[:] = bg[:, None, None]

    mask = _glyph_mask(shape_id, rng)
    img[:, mask] = glyph_rgb[:, None]
    img += rng.normal(0.0, 0.03, size=img.shape).astype(np.float32)
    return np.clip(img, 0.0, 1.0), shape_id, hue_id


def make_dataset(task: str, n: int, seed: int) -> tuple[torch.Tensor, torch.Tensor]:
    """Deterministic dataset: images (n, 3, 64, 64) in [0,1] plus labels."""
    if task not in TASKS:
        raise ConfigurationError(f"unknown task {task!r}; tasks: {sorted(TASKS)}")
    images = np.empty((n, 3, IMAGE_SIZE, IMAGE_SIZE), dtype=np.float32)
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        img, shape_id, hue_id = generate_sample(rng)
        images[i] = img
        labels[i] = shape_id if task == "shape" else hue_id
    return torch.from_numpy(images), torch.from_numpy(labels)


class TaskClassifier(nn.Module):
    """Small CNN whose third conv block is the feature tap."""

    def __init__(self, n_classes: int):
        super().__init__()
        self.n_classes = n_classes
        self.conv1 = nn.Conv2d(3, 16, 3, stride=2, padding=1)
        self.conv2 = nn.Conv2d(16, 32, 3, stride=2, padding=1)
        self.conv3 = nn.Conv2d(32, 48, 3, stride=2, padding=1)
        self.conv4 = nn.Conv2d(48, 64, 3, stride=2, padding=1)
        self.head = nn.Linear(64, n_classes)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        """Mid-level feature map, (B, 48, H/8, W/8)."""
        f = torch.relu(self.conv1(x))
        f = torch.relu(self.conv2(f))
        return torch.relu(self.conv3(f))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        f = self.features(x)
        f = torch.relu(self.conv4(f))
        return self.head(f.mean(dim=(2, 3)))


def freeze(model: nn.Module) -> nn.Module:
    for p in model.parameters():
        p.requires_grad_(False)
    return model.eval()


def train_task_model(
    task: str,
    n_train: int = 2048,
    epochs: int = 24,
    batch_size: int = 64,
    lr: float = 4e-3,
    seed: int = 7,
) -> TaskClassifier:
    """Train a classifier on clean synthetic images, then freeze it."""
    torch.manual_seed(seed)
    model = TaskClassifier(TASKS[task])
    images, labels = make_dataset(task, n_train, seed)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    loss_fn = nn.CrossEntropyLoss()
    order_rng = np.random.default_rng(seed)
    model.train()
    for _ in range(epochs):
        order = order_rng.permutation(n_train)
        for lo in range(0, n_train, batch_size):
            sel = order[lo:lo + batch_size]
            opt.zero_grad()
            loss = loss_fn(model(images[sel]), labels[sel])
            loss.backward()
            opt.step()
    return freeze(model)


@torch.no_grad()
def accuracy(model: TaskClassifier, images: torch.Tensor, labels: torch.Tensor,
             batch_size: int = 128) -> float:
    hits = 0
    for lo in range(0, len(images), batch_size):
        logits = model(images[lo:lo + batch_size])
        hits += int((logits.argmax(dim=1) == labels[lo:lo + batch_size]).sum())
    return hits / len(images)


def save_task_model(path, model: TaskClassifier) -> None:
    torch.save({"n_classes": model.n_classes, "state_dict": model.state_dict()}, path)


def load_task_model(path) -> TaskClassifier:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    model = TaskClassifier(payload["n_classes"])
    model.load_state_dict(payload["state_dict"])
    return freeze(model)
