"""Flat INI-style configuration with per-module sections.

Every tunable has a documented default below; a config file overrides
defaults, command-line flags override the file, and the merged result hashes
to a stable id that run manifests record so a run can be reproduced from its
manifest alone.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from pathlib import Path

from taskcodec.errors import ConfigurationError

# Central default table: section -> key -> default value.  Types are inferred
# from these defaults when parsing files and overrides.
DEFAULTS: dict[str, dict] = {
    "model": {
        "latent_channels": 48,
        "hidden": 64,
        "hyper_channels": 32,
        "adapter_reduction": 4,
        "scorer_bypass": False,
        "group_sizes": "",       # e.g. "1,1,2,4,40"; empty = derived from channels
        "scale_table": "",       # e.g. "1,1.85,2.27,3.71,23988.33"; empty = default table
    },
    "training": {
        "stage": 1,
        "task": "shape",
        "lambda": 1.0,
        "phi_adapters": 0.1,
        "phi_channels": 0.3,
        "epochs": 0,             # 0 = stage default schedule
        "lr": 0.0,               # 0 = stage default schedule
        "batch_size": 0,         # 0 = stage default schedule
        "n_train": 512,
        "n_val": 256,
        "data_seed": 11,
        "seed": 0,
        "eval_batch": 128,
        "clip_norm": 1.0,
        "cosine_lr": False,
    },
    "task_model": {
        "n_train": 2048,
        "epochs": 24,
        "batch_size": 64,
        "lr": 4e-3,
        "seed": 7,
    },
    "probe": {
        "mode": "zero",
        "intensity": 0.5,
        "group_size": 1,
        "n_images": 256,
        "seed": 0,
        "batch": 128,
    },
    "removal": {
        "seeds": "0,1,2,3,4",
        "n_images": 256,
        "batch": 128,
    },
    "sweep": {
        "group_index": 4,
        "grid": "",
        "n_images": 256,
        "batch": 128,
    },
    "eval": {
        "n_images": 512,
        "batch": 128,
        "label": "model",
    },
}


def default_config() -> dict[str, dict]:
    return {section: dict(values) for section, values in DEFAULTS.items()}


def _coerce(section: str, key: str, raw, default):
    if isinstance(raw, type(default)) and not isinstance(raw, str):
        return raw
    text = str(raw).strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError:
        raise ConfigurationError(
            f"config value [{section}] {key} = {raw!r} is not a valid "
            f"{type(default).__name__}"
        ) from None


def load_config(path: str | Path | None = None,
                overrides: dict[str, dict] | None = None) -> dict[str, dict]:
    """Defaults, overlaid with an INI file, overlaid with override pairs.

    Unknown sections or keys are rejected with the list of valid names so a
    typo fails loudly instead of silently using a default.
    """
    config = default_config()
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(str(path))
        if not read:
            raise ConfigurationError(f"config file not found or unreadable: {path}")
        for section in parser.sections():
            if section not in config:
                raise ConfigurationError(
                    f"unknown config section [{section}]; valid sections: "
                    f"{sorted(config)}"
                )
            for key, raw in parser.items(section):
                if key not in config[section]:
                    raise ConfigurationError(
                        f"unknown key {key!r} in section [{section}]; valid keys: "
                        f"{sorted(config[section])}"
                    )
                config[section][key] = _coerce(section, key, raw, DEFAULTS[section][key])
    for section, pairs in (overrides or {}).items():
        if section not in config:
            raise ConfigurationError(
                f"unknown config section [{section}]; valid sections: {sorted(config)}"
            )
        for key, raw in pairs.items():
            if key not in config[section]:
                raise ConfigurationError(
                    f"unknown key {key!r} in section [{section}]; valid keys: "
                    f"{sorted(config[section])}"
                )
            config[section][key] = _coerce(section, key, raw, DEFAULTS[section][key])
    return config


def config_hash(config: dict[str, dict]) -> str:
    """Stable short id of a merged configuration."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def parse_number_list(text: str, kind=float) -> tuple:
    """Comma-separated numbers -> tuple; empty string -> empty tuple."""
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(kind(part.strip()) for part in text.split(","))
    except ValueError:
        raise ConfigurationError(
            f"expected comma-separated {kind.__name__} values, got {text!r}"
        ) from None
