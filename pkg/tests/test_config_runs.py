"""Config loading/merging and run-directory bookkeeping."""

import csv
import json

import pytest

from taskcodec.config import (
    DEFAULTS,
    config_hash,
    default_config,
    load_config,
    parse_number_list,
)
from taskcodec.errors import ConfigurationError
from taskcodec.runs import create_run_dir, file_digest, write_csv, write_manifest


class TestLoadConfig:
    def test_defaults_when_nothing_supplied(self):
        assert load_config() == default_config()

    def test_defaults_are_copies(self):
        cfg = default_config()
        cfg["model"]["latent_channels"] = 999
        assert DEFAULTS["model"]["latent_channels"] != 999

    def test_file_overlay(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[training]\nstage = 2\nlambda = 0.5\n")
        cfg = load_config(path)
        assert cfg["training"]["stage"] == 2
        assert cfg["training"]["lambda"] == 0.5
        assert cfg["model"] == DEFAULTS["model"]

    def test_override_pairs_win_over_file(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[training]\nstage = 2\n")
        cfg = load_config(path, overrides={"training": {"stage": "3"}})
        assert cfg["training"]["stage"] == 3

    def test_unknown_section_rejected_with_candidates(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[trainning]\nstage = 2\n")
        with pytest.raises(ConfigurationError, match="valid sections"):
            load_config(path)

    def test_unknown_key_rejected_with_candidates(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[training]\nstages = 2\n")
        with pytest.raises(ConfigurationError, match="valid keys"):
            load_config(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            load_config(tmp_path / "nope.ini")

    def test_type_coercion(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[model]\nscorer_bypass = yes\nlatent_channels = 24\n")
        cfg = load_config(path)
        assert cfg["model"]["scorer_bypass"] is True
        assert cfg["model"]["latent_channels"] == 24

    def test_bad_number_rejected(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[training]\nepochs = soon\n")
        with pytest.raises(ConfigurationError, match="not a valid"):
            load_config(path)

    def test_bad_bool_rejected(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[model]\nscorer_bypass = maybe\n")
        with pytest.raises(ConfigurationError, match="not a valid"):
            load_config(path)


class TestConfigHash:
    def test_stable_and_order_insensitive(self):
        a = {"x": {"b": 1, "a": 2}}
        b = {"x": {"a": 2, "b": 1}}
        assert config_hash(a) == config_hash(b)
        assert len(config_hash(a)) == 16

    def test_sensitive_to_values(self):
        assert config_hash({"x": {"a": 1}}) != config_hash({"x": {"a": 2}})


class TestParseNumberList:
    def test_floats(self):
        assert parse_number_list("1, 2.5,1e3") == (1.0, 2.5, 1000.0)

    def test_ints(self):
        assert parse_number_list("4,4, 8", kind=int) == (4, 4, 8)

    def test_empty(self):
        assert parse_number_list("  ") == ()

    def test_bad_entry(self):
        with pytest.raises(ConfigurationError, match="comma-separated"):
            parse_number_list("1,two,3")


class TestRunDirs:
    def test_explicit_out_dir(self, tmp_path):
        target = tmp_path / "somewhere" / "deep"
        assert create_run_dir("train", out=target) == target
        assert target.is_dir()

    def test_serial_suffixes(self, tmp_path, monkeypatch):
        monkeypatch.setenv("TASKCODEC_RUNS", str(tmp_path / "runs"))
        first = create_run_dir("probe")
        second = create_run_dir("probe")
        third = create_run_dir("probe")
        assert first.name == "probe"
        assert second.name == "probe-1"
        assert third.name == "probe-2"

    def test_file_digest_matches_content(self, tmp_path):
        f = tmp_path / "blob.bin"
        f.write_bytes(b"hello")
        # sha256("hello") prefix
        assert file_digest(f) == "2cf24dba5fb0a30e"

    def test_manifest_contents(self, tmp_path):
        inp = tmp_path / "model.pt"
        inp.write_bytes(b"weights")
        path = write_manifest(
            tmp_path, "probe", {"a": 1}, "cafe0123", seed=7,
            inputs={"checkpoint": inp}, extra={"note": "x"},
        )
        data = json.loads(path.read_text())
        assert data["command"] == "probe"
        assert data["config"] == {"a": 1}
        assert data["config_hash"] == "cafe0123"
        assert data["seed"] == 7
        assert data["inputs"]["checkpoint"]["sha256_16"] == file_digest(inp)
        assert data["note"] == "x"

    def test_write_csv_schema_and_blanks(self, tmp_path):
        path = write_csv(tmp_path / "rows.csv", [{"a": 1}, {"a": 2, "b": "x"}], ["a", "b"])
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert rows == [{"a": "1", "b": ""}, {"a": "2", "b": "x"}]
