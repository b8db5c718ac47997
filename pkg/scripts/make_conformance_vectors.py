"""Generate the frozen cross-implementation vectors under conformance/.

Three files pin the byte-level coding contract so an independent port of the
range coder and the container format can prove byte identity:

    rans_cases.json       handcrafted and seeded symbol/CDF cases -> bytes
    latent_segments.json  100 Gaussian-latent segments -> bytes + rate bounds
    container_cases.json  header/segment combinations -> packed bytes

The files are committed; this script exists to document their provenance and
regenerate them after a deliberate format change.  Generation is fully
deterministic (fixed seeds, no timestamps), so an accidental behaviour change
in the coder shows up as a diff against the committed vectors.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from taskcodec import container
from taskcodec.coder import (
    PROB_SCALE,
    clamp_offsets,
    encode_symbols,
    decode_symbols,
    gaussian_cdf_rows,
    offsets_to_symbols,
    quantize_pmf,
)
from taskcodec.entropy import LIKELIHOOD_FLOOR
from taskcodec.grouping import GroupSpec

OUT_DIR = Path(__file__).resolve().parent.parent / "conformance"


def _counts(row: np.ndarray) -> list[int]:
    return [int(v) for v in np.diff(row)]


def _rows_from_counts(counts_list) -> list[np.ndarray]:
    return [np.concatenate([[0], np.cumsum(c)]) for c in counts_list]


def _pmf_bits(rows, row_index, symbols) -> float:
    bits = 0.0
    for r, s in zip(row_index, symbols):
        row = rows[r]
        freq = int(row[s + 1]) - int(row[s])
        bits += -np.log2(freq / PROB_SCALE)
    return float(bits)


def _case(name: str, rows, symbols, row_index) -> dict:
    rows = [np.asarray(r, dtype=np.int64) for r in rows]
    symbols = np.asarray(symbols, dtype=np.int64)
    row_index = np.asarray(row_index, dtype=np.int64)
    data = encode_symbols(symbols, rows, row_index)
    assert np.array_equal(decode_symbols(data, rows, row_index), symbols)
    return {
        "name": name,
        "row_counts": [_counts(r) for r in rows],
        "row_index": [int(v) for v in row_index],
        "symbols": [int(v) for v in symbols],
        "bytes": data.hex(),
        "pmf_bits": round(_pmf_bits(rows, row_index, symbols), 6),
    }


def make_rans_cases() -> list[dict]:
    cases = []

    uniform2 = np.array([0, PROB_SCALE // 2, PROB_SCALE])
    cases.append(_case("uniform_binary_alternating",
                       [uniform2], [j % 2 for j in range(64)], [0] * 64))

    single = np.array([0, PROB_SCALE])
    cases.append(_case("single_bin_run", [single], [0] * 100, [0] * 100))

    skewed = np.concatenate([[0], np.cumsum(quantize_pmf([0.99, 0.01]))])
    syms = [0] * 50 + [1] + [0] * 49
    cases.append(_case("skewed_99_to_1", [skewed], syms, [0] * 100))

    cases.append(_case("empty_stream", [uniform2], [], []))

    wide = np.concatenate([[0], np.cumsum(quantize_pmf(np.full(511, 1 / 511)))])
    rng = np.random.default_rng(2024)
    syms = rng.integers(0, 511, size=256)
    cases.append(_case("wide_row_511_bins", [wide], syms, [0] * 256))

    minfreq = np.concatenate(
        [[0], np.cumsum(quantize_pmf([1.0] + [0.0] * 9))]
    )
    syms = [9, 0, 0, 8, 0, 1, 0, 0, 7, 0]
    cases.append(_case("minimum_frequency_bins", [minfreq], syms, [0] * 10))

    for i in range(30):
        rng = np.random.default_rng(1000 + i)
        n_rows = int(rng.integers(1, 7))
        rows = []
        for _ in range(n_rows):
            width = int(rng.integers(2, 41))
            pmf = rng.dirichlet(np.full(width, 0.6))
            rows.append(np.concatenate([[0], np.cumsum(quantize_pmf(pmf))]))
        n_symbols = int(rng.integers(1, 401))
        row_index = rng.integers(0, n_rows, size=n_symbols)
        symbols = np.array([
            rng.choice(len(rows[r]) - 1,
                       p=np.diff(rows[r]) / PROB_SCALE)
            for r in row_index
        ])
        cases.append(_case(f"seeded_{i:02d}", rows, symbols, row_index))
    return cases


def make_latent_segments() -> list[dict]:
    segments = []
    for i in range(100):
        rng = np.random.default_rng(5000 + i)
        n = int(rng.integers(64, 513))
        # a per-segment palette of predicted scales: real latents share rows
        # heavily because nearby elements get similar scale predictions
        k = int(rng.integers(3, 17))
        palette = np.exp(rng.uniform(np.log(0.03), np.log(40.0), size=k))
        sigmas = palette[rng.integers(0, k, size=n)]
        values = rng.normal(0.0, np.clip(sigmas, 0.05, 32.0) * 1.1, size=n)
        offsets = np.round(values).astype(np.int64)

        rows, radii, row_index = gaussian_cdf_rows(sigmas)
        offsets = clamp_offsets(offsets, radii, row_index)
        symbols = offsets_to_symbols(offsets, radii, row_index)
        data = encode_symbols(symbols, rows, row_index)
        assert np.array_equal(decode_symbols(data, rows, row_index), symbols)

        # window-likelihood estimate at the coded integer offsets, matching
        # how the codec estimates rate before real coding
        from scipy.special import ndtr

        sig = np.clip(sigmas, 0.05, 32.0)
        lik = ndtr((offsets + 0.5) / sig) - ndtr((offsets - 0.5) / sig)
        est_bits = float(-np.log2(np.clip(lik, LIKELIHOOD_FLOOR, 1.0)).sum())

        real_bits = 8 * len(data)
        assert real_bits <= est_bits * 1.02 + 32, (i, real_bits, est_bits)
        segments.append({
            "name": f"segment_{i:03d}",
            "row_counts": [_counts(r) for r in rows],
            "row_index": [int(v) for v in row_index],
            "symbols": [int(v) for v in symbols],
            "bytes": data.hex(),
            "estimated_bits": round(est_bits, 6),
            "pmf_bits": round(_pmf_bits(rows, row_index, symbols), 6),
        })
    return segments


def make_container_cases() -> list[dict]:
    desk = GroupSpec((1, 1, 2, 4, 40), (1.0, 1.85, 2.27, 3.71, 10 ** 4.38))
    small = GroupSpec((1, 2, 5), (1.0, 2.0, 4.0))
    perm = GroupSpec((1, 2, 5), (1.0, 2.0, 4.0), tuple(reversed(range(8))))
    rng = np.random.default_rng(77)

    def seg(n):
        return bytes(rng.integers(0, 256, size=n, dtype=np.uint8))

    cases = []
    for name, h, w, spec, task, lam, sizes in [
        ("desk_five_groups", 64, 64, desk, "shape", 1.0, (31, 9, 7, 11, 100, 3)),
        ("small_identity", 32, 48, small, "hue", 0.5, (12, 4, 4, 4)),
        ("with_permutation", 16, 16, perm, "shape", 2.0, (8, 8, 8, 8)),
        ("no_task", 16, 16, small, "", 0.25, (5, 5, 5, 5)),
        ("unicode_task", 16, 16, small, "café-β", 0.2, (6, 6, 6, 6)),
        ("large_segment", 256, 320, small, "shape", 1.0, (4096, 10, 10, 10)),
        ("minimal_segments", 16, 16, small, "t", 123.456789, (4, 4, 4, 4)),
    ]:
        header = container.StreamHeader(h, w, spec, task, lam)
        segments = [seg(n) for n in sizes]
        data = container.pack(header, segments)
        got_header, got_segments = container.unpack(data)
        assert got_segments == segments and got_header.task == task
        cases.append({
            "name": name,
            "height": h,
            "width": w,
            "sizes": list(spec.sizes),
            "scales": [float(s) for s in spec.scales],
            "permutation": None if spec.permutation is None
            else list(spec.permutation),
            "task": task,
            "lam": lam,
            "segments": [s.hex() for s in segments],
            "bytes": data.hex(),
        })
    return cases


def main() -> int:
    OUT_DIR.mkdir(exist_ok=True)
    outputs = {
        "rans_cases.json": make_rans_cases(),
        "latent_segments.json": make_latent_segments(),
        "container_cases.json": make_container_cases(),
    }
    for name, payload in outputs.items():
        path = OUT_DIR / name
        with open(path, "w") as fh:
            json.dump(payload, fh, separators=(",", ":"))
            fh.write("\n")
        print(f"wrote {path} ({path.stat().st_size} bytes, {len(payload)} cases)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
