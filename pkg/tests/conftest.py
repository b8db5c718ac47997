"""Shared fixtures: a small codec, deterministic data, and cached artifacts."""

from __future__ import annotations

import numpy as np
import pytest
import torch

from taskcodec.codec import ImageCodec
from taskcodec.tasknet import make_dataset

# One (criterion, ok, detail) row per acceptance check, printed as a summary
# block at the end of the run so every criterion gets a visible verdict line.
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record_acceptance(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS.append((name, ok, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{verdict}  {name}: {detail}")


@pytest.fixture(autouse=True)
def _deterministic_torch():
    torch.manual_seed(0)


@pytest.fixture()
def codec() -> ImageCodec:
    torch.manual_seed(7)
    model = ImageCodec()
    model.adapters.register_task("shape")
    model.eval()
    return model


@pytest.fixture(scope="session")
def shape_data():
    return make_dataset("shape", 16, 123)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(42)
