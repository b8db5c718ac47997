"""Byte-exact range coder: losslessness, stream framing, CDF construction."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taskcodec.coder import (
    MAX_RADIUS,
    PROB_BITS,
    PROB_SCALE,
    RANS_L,
    SIGMA_MAX,
    SIGMA_MIN,
    StreamDecoder,
    clamp_offsets,
    decode_symbols,
    encode_symbols,
    gaussian_cdf_rows,
    offsets_to_symbols,
    quantize_pmf,
    symbols_to_offsets,
    validate_row,
)
from taskcodec.errors import ConfigurationError, DecodeError


def mirror_encode(symbols, rows, row_index) -> bytes:
    """Independent re-implementation used as an oracle.  Also asserts that
    every intermediate state fits in an unsigned 32-bit word, which is what
    makes ports to 53-bit-integer languages byte-exact."""
    x = RANS_L
    out = bytearray()
    for j in range(len(symbols) - 1, -1, -1):
        row = rows[row_index[j]]
        start = int(row[symbols[j]])
        freq = int(row[symbols[j] + 1]) - start
        while x >= ((RANS_L >> PROB_BITS) << 8) * freq:
            out.append(x & 0xFF)
            x >>= 8
        x = (x // freq) * PROB_SCALE + (x % freq) + start
        assert x < (1 << 32)
    for _ in range(4):
        out.append(x & 0xFF)
        x >>= 8
    out.reverse()
    return bytes(out)


def make_row(rng, n_bins):
    pmf = rng.dirichlet(np.full(n_bins, 0.5))
    counts = quantize_pmf(pmf)
    return np.concatenate([[0], np.cumsum(counts)])


class TestRoundTrip:
    def test_single_symbol(self):
        row = np.array([0, 30000, PROB_SCALE])
        data = encode_symbols([1], [row], [0])
        assert decode_symbols(data, [row], [0]).tolist() == [1]

    def test_empty_stream_is_flush_only(self):
        row = np.array([0, PROB_SCALE])
        data = encode_symbols([], [row], [])
        assert len(data) == 4
        assert decode_symbols(data, [row], []).tolist() == []

    def test_random_streams_round_trip(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            rows = [make_row(rng, int(rng.integers(2, 64))) for _ in range(4)]
            n = int(rng.integers(1, 400))
            row_index = rng.integers(0, len(rows), size=n)
            symbols = np.array([rng.integers(0, len(rows[r]) - 1) for r in row_index])
            data = encode_symbols(symbols, rows, row_index)
            assert np.array_equal(decode_symbols(data, rows, row_index), symbols)

    def test_matches_mirror_encoder(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            rows = [make_row(rng, int(rng.integers(2, 32))) for _ in range(3)]
            n = int(rng.integers(1, 200))
            row_index = rng.integers(0, len(rows), size=n)
            symbols = np.array([rng.integers(0, len(rows[r]) - 1) for r in row_index])
            assert encode_symbols(symbols, rows, row_index) == mirror_encode(
                symbols, rows, row_index
            )

    def test_skewed_distribution_round_trip(self):
        # one huge bin and many singletons stresses renormalization
        counts = np.full(40, 1, dtype=np.int64)
        counts[0] = PROB_SCALE - 39
        row = np.concatenate([[0], np.cumsum(counts)])
        rng = np.random.default_rng(2)
        symbols = np.where(rng.random(500) < 0.98, 0, rng.integers(1, 40, size=500))
        data = encode_symbols(symbols, [row], np.zeros(500, dtype=np.int64))
        assert np.array_equal(decode_symbols(data, [row], np.zeros(500, dtype=np.int64)), symbols)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 300))
    def test_property_round_trip(self, seed, n):
        rng = np.random.default_rng(seed)
        rows = [make_row(rng, int(rng.integers(2, 50)))]
        symbols = rng.integers(0, len(rows[0]) - 1, size=n)
        idx = np.zeros(n, dtype=np.int64)
        assert np.array_equal(decode_symbols(encode_symbols(symbols, rows, idx), rows, idx), symbols)


class TestStreamErrors:
    def _stream(self):
        rng = np.random.default_rng(3)
        row = make_row(rng, 16)
        symbols = rng.integers(0, 16, size=50)
        idx = np.zeros(50, dtype=np.int64)
        return encode_symbols(symbols, [row], idx), row, idx

    def test_truncated_stream_raises(self):
        data, row, idx = self._stream()
        with pytest.raises(DecodeError):
            decode_symbols(data[:-3], [row], idx)

    def test_too_short_for_state(self):
        with pytest.raises(DecodeError):
            StreamDecoder(b"\x01\x02")

    def test_trailing_bytes_fail_finish(self):
        data, row, idx = self._stream()
        with pytest.raises(DecodeError):
            decode_symbols(data + b"\x00", [row], idx)

    def test_out_of_support_symbol_rejected(self):
        row = np.array([0, PROB_SCALE])
        with pytest.raises(ConfigurationError):
            encode_symbols([1], [row], [0])
        with pytest.raises(ConfigurationError):
            encode_symbols([-1], [row], [0])

    def test_incremental_decode_matches_batch(self):
        data, row, idx = self._stream()
        whole = decode_symbols(data, [row], idx)
        dec = StreamDecoder(data)
        first = dec.decode([row], idx[:20])
        rest = dec.decode([row], idx[20:])
        dec.finish()
        assert np.array_equal(np.concatenate([first, rest]), whole)


class TestRowValidation:
    def test_accepts_valid(self):
        validate_row(np.array([0, 10, PROB_SCALE]))

    def test_rejects_bad_endpoints(self):
        with pytest.raises(ConfigurationError):
            validate_row(np.array([1, PROB_SCALE]))
        with pytest.raises(ConfigurationError):
            validate_row(np.array([0, PROB_SCALE - 1]))

    def test_rejects_zero_frequency(self):
        with pytest.raises(ConfigurationError):
            validate_row(np.array([0, 10, 10, PROB_SCALE]))

    def test_rejects_scalar(self):
        with pytest.raises(ConfigurationError):
            validate_row(np.array([0]))


class TestQuantizePmf:
    def test_sums_to_grid(self):
        rng = np.random.default_rng(4)
        for n in (2, 7, 100, 1000):
            counts = quantize_pmf(rng.dirichlet(np.ones(n)))
            assert int(counts.sum()) == PROB_SCALE
            assert counts.min() >= 1

    def test_tiny_probabilities_get_one_count(self):
        counts = quantize_pmf(np.array([1.0 - 1e-12, 1e-12]))
        assert counts[1] == 1
        assert int(counts.sum()) == PROB_SCALE

    def test_uniform_is_exact(self):
        counts = quantize_pmf(np.full(16, 1 / 16))
        assert np.array_equal(counts, np.full(16, PROB_SCALE // 16))

    def test_rejects_empty_and_oversized(self):
        with pytest.raises(ConfigurationError):
            quantize_pmf(np.array([]))
        with pytest.raises(ConfigurationError):
            quantize_pmf(np.full(PROB_SCALE, 1.0 / PROB_SCALE))


class TestGaussianRows:
    def test_radius_rule(self):
        rows, radii, _ = gaussian_cdf_rows(np.array([0.5, 2.0, 100.0]))
        # sigma is clamped to SIGMA_MAX before the radius rule
        assert radii.tolist() == [3, 12, int(np.ceil(6 * SIGMA_MAX))]
        for row, r in zip(rows, radii):
            assert len(row) == 2 * r + 2
            validate_row(row)

    def test_radius_cap(self):
        assert int(np.ceil(6 * SIGMA_MAX)) <= MAX_RADIUS

    def test_deduplication(self):
        rows, _, idx = gaussian_cdf_rows(np.array([1.0, 2.0, 1.0, 1.0]))
        assert len(rows) == 2
        assert idx[0] == idx[2] == idx[3]
        assert idx[0] != idx[1]

    def test_clamping_merges_tiny_sigmas(self):
        rows, _, idx = gaussian_cdf_rows(np.array([1e-9, SIGMA_MIN / 2, SIGMA_MIN]))
        assert len(rows) == 1
        assert np.all(idx == 0)

    def test_row_is_symmetric_for_centered_gaussian(self):
        rows, radii, _ = gaussian_cdf_rows(np.array([3.0]))
        counts = np.diff(rows[0])
        assert np.array_equal(counts, counts[::-1])

    def test_offsets_round_trip_and_clamp(self):
        sig = np.array([1.0, 1.0, 4.0])
        rows, radii, idx = gaussian_cdf_rows(sig)
        offsets = np.array([-6, 2, 500])
        clamped = clamp_offsets(offsets, radii, idx)
        assert clamped.tolist() == [-6, 2, int(radii[idx[2]])]
        symbols = offsets_to_symbols(clamped, radii, idx)
        assert np.all(symbols >= 0)
        back = symbols_to_offsets(symbols, radii, idx)
        assert np.array_equal(back, clamped)

    def test_coding_near_entropy(self):
        # real bits on a large i.i.d. sample stay close to the Shannon estimate
        rng = np.random.default_rng(5)
        sigma = 2.0
        values = np.round(rng.normal(0, sigma, size=10000)).astype(np.int64)
        rows, radii, idx = gaussian_cdf_rows(np.full(10000, sigma))
        symbols = offsets_to_symbols(clamp_offsets(values, radii, idx), radii, idx)
        data = encode_symbols(symbols, rows, idx)
        counts = np.diff(rows[0])
        est_bits = float(np.sum(PROB_BITS - np.log2(counts[symbols])))
        real_bits = 8 * len(data)
        assert real_bits <= est_bits * 1.02 + 32
        assert np.array_equal(decode_symbols(data, rows, idx), symbols)
