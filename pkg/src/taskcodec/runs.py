"""Run directories and manifests.

Every CLI command writes its outputs under a run directory containing a
manifest.json that records the merged config and its hash, the seed, the
exact command line, and a checksum of every input checkpoint — enough to
reproduce the run bitwise in deterministic mode.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
import time
from pathlib import Path

RUN_ROOT_ENV = "TASKCODEC_RUNS"
DEFAULT_RUN_ROOT = "runs"


def run_root() -> Path:
    return Path(os.environ.get(RUN_ROOT_ENV, DEFAULT_RUN_ROOT))


def create_run_dir(name: str, out: str | Path | None = None) -> Path:
    """An explicitly chosen directory, or <run root>/<name>-<serial>."""
    if out is not None:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        return path
    root = run_root()
    root.mkdir(parents=True, exist_ok=True)
    serial = 0
    while True:
        path = root / (name if serial == 0 else f"{name}-{serial}")
        try:
            path.mkdir(parents=False, exist_ok=False)
            return path
        except FileExistsError:
            serial += 1


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def write_manifest(
    run_dir: str | Path,
    command: str,
    config: dict,
    config_id: str,
    seed: int | None = None,
    inputs: dict[str, str | Path] | None = None,
    extra: dict | None = None,
) -> Path:
    manifest = {
        "command": command,
        "argv": sys.argv,
        "config": config,
        "config_hash": config_id,
        "seed": seed,
        "inputs": {
            name: {"path": str(p), "sha256_16": file_digest(p)}
            for name, p in (inputs or {}).items()
        },
        "created_unix": int(time.time()),
    }
    if extra:
        manifest.update(extra)
    path = Path(run_dir) / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_csv(path: str | Path, rows: list[dict], fields: list[str]) -> Path:
    import csv

    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fields})
    return path
