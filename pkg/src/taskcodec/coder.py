"""Byte-exact range coder (rANS flavour) and quantized CDF construction.

Frequencies live on a 16-bit grid (total 65536, minimum count 1, matching the
2^-16 likelihood floor), the coder state is renormalized a byte at a time
above a 2^23 lower bound, and the final state is flushed as 4 bytes.  All
intermediate values stay below 2^32, so ports to languages with 53-bit safe
integers reproduce the streams exactly.

CDF rows are keyed by the predicted scale only: mean-centered rounding makes
the coded symbol a zero-mean integer offset, so a row is the discretized
Gaussian over offsets in [-r, r] with the tails folded into the end bins.
"""

from __future__ import annotations

from bisect import bisect_right

import numpy as np
from scipy.special import ndtr

from taskcodec.errors import ConfigurationError, DecodeError

PROB_BITS = 16
PROB_SCALE = 1 << PROB_BITS
RANS_L = 1 << 23
_RENORM_FACTOR = (RANS_L >> PROB_BITS) << 8  # per-unit-frequency renorm bound

SIGMA_MIN = 0.05
SIGMA_MAX = 32.0
MAX_RADIUS = 255


def validate_row(row) -> None:
    c = np.asarray(row)
    if c.ndim != 1 or len(c) < 2:
        raise ConfigurationError("a CDF row needs at least two entries")
    if c[0] != 0 or c[-1] != PROB_SCALE:
        raise ConfigurationError(
            f"a CDF row must run from 0 to {PROB_SCALE}, got {c[0]}..{c[-1]}"
        )
    if np.any(np.diff(c) < 1):
        raise ConfigurationError("CDF rows must be strictly increasing (min frequency 1)")


def encode_symbols(symbols, rows, row_index) -> bytes:
    """Encode symbols[j] with CDF rows[row_index[j]]; returns the byte stream.

    Decoding happens in the order given here; the encoder walks the list
    backwards because the coder is last-in first-out.
    """
    symbols = np.asarray(symbols, dtype=np.int64)
    row_index = np.asarray(row_index, dtype=np.int64)
    if symbols.shape != row_index.shape or symbols.ndim != 1:
        raise ConfigurationError("symbols and row_index must be 1-D and equally long")
    rows = [np.asarray(r, dtype=np.int64) for r in rows]
    for r in rows:
        validate_row(r)

    x = RANS_L
    out = bytearray()
    for j in range(len(symbols) - 1, -1, -1):
        row = rows[row_index[j]]
        s = int(symbols[j])
        if not 0 <= s < len(row) - 1:
            raise ConfigurationError(
                f"symbol {s} outside CDF support [0, {len(row) - 1}) at position {j}"
            )
        start = int(row[s])
        freq = int(row[s + 1]) - start
        x_max = _RENORM_FACTOR * freq
        while x >= x_max:
            out.append(x & 0xFF)
            x >>= 8
        x = ((x // freq) << PROB_BITS) + (x % freq) + start
    for _ in range(4):
        out.append(x & 0xFF)
        x >>= 8
    out.reverse()
    return bytes(out)


class StreamDecoder:
    """Stateful decoder so callers can interleave decoding with parameter
    computation (later symbols' CDFs may depend on earlier symbols)."""

    def __init__(self, data: bytes):
        if len(data) < 4:
            raise DecodeError(f"stream of {len(data)} bytes cannot hold a coder state")
        self.data = data
        self.x = int.from_bytes(data[0:4], "big")
        self.pos = 4

    def decode(self, rows, row_index) -> np.ndarray:
        """Decode the next len(row_index) symbols."""
        row_index = np.asarray(row_index, dtype=np.int64)
        rows = [np.asarray(r, dtype=np.int64) for r in rows]
        for r in rows:
            validate_row(r)
        x, data, pos = self.x, self.data, self.pos
        mask = PROB_SCALE - 1
        symbols = np.empty(len(row_index), dtype=np.int64)
        for j in range(len(row_index)):
            row = rows[row_index[j]]
            slot = x & mask
            s = bisect_right(row, slot) - 1
            start = int(row[s])
            freq = int(row[s + 1]) - start
            symbols[j] = s
            x = freq * (x >> PROB_BITS) + slot - start
            while x < RANS_L:
                if pos >= len(data):
                    raise DecodeError("stream truncated mid-symbol")
                x = (x << 8) | data[pos]
                pos += 1
        self.x, self.pos = x, pos
        return symbols

    def finish(self) -> None:
        """Assert the stream was consumed exactly; call after the last symbol."""
        if self.x != RANS_L or self.pos != len(self.data):
            raise DecodeError("stream did not decode back to the initial coder state")


def decode_symbols(data: bytes, rows, row_index) -> np.ndarray:
    """Inverse of encode_symbols; raises DecodeError on truncated or
    desynchronized streams."""
    dec = StreamDecoder(data)
    symbols = dec.decode(rows, row_index)
    dec.finish()
    return symbols


def quantize_pmf(pmf: np.ndarray) -> np.ndarray:
    """Round a probability vector onto the 16-bit grid, every bin >= 1."""
    p = np.asarray(pmf, dtype=np.float64)
    if p.ndim != 1 or len(p) == 0:
        raise ConfigurationError("pmf must be a non-empty vector")
    if len(p) > PROB_SCALE // 2:
        raise ConfigurationError(f"pmf with {len(p)} bins cannot fit the 16-bit grid")
    counts = np.maximum(1, np.round(p * PROB_SCALE)).astype(np.int64)
    diff = PROB_SCALE - int(counts.sum())
    if diff > 0:
        counts[int(np.argmax(counts))] += diff
    while diff < 0:
        j = int(np.argmax(counts))
        take = min(int(counts[j]) - 1, -diff)
        counts[j] -= take
        diff += take
    return counts


def _row_for_sigma(sigma: float) -> tuple[np.ndarray, int]:
    radius = int(min(MAX_RADIUS, max(1, np.ceil(6.0 * sigma))))
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    upper = ndtr((k + 0.5) / sigma)
    lower = ndtr((k - 0.5) / sigma)
    pmf = upper - lower
    pmf[0] = upper[0]          # fold the lower tail in
    pmf[-1] = 1.0 - lower[-1]  # and the upper tail
    counts = quantize_pmf(pmf)
    row = np.concatenate([[0], np.cumsum(counts)])
    return row, radius


def gaussian_cdf_rows(sigmas) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    """Deduplicated CDF rows for an array of predicted scales.

    Returns (rows, radii, row_index): rows[k] spans offsets -radii[k]..radii[k]
    and row_index maps each input element to its row.  Scales are clamped to
    [SIGMA_MIN, SIGMA_MAX] in float32 so the row key is stable.
    """
    sig = np.asarray(sigmas, dtype=np.float64).reshape(-1)
    sig = np.clip(sig, SIGMA_MIN, SIGMA_MAX).astype(np.float32)
    unique, row_index = np.unique(sig, return_inverse=True)
    rows, radii = [], []
    for s in unique:
        row, radius = _row_for_sigma(float(s))
        rows.append(row)
        radii.append(radius)
    return rows, np.asarray(radii, dtype=np.int64), row_index.astype(np.int64)


def clamp_offsets(offsets, radii, row_index) -> np.ndarray:
    """Clamp integer offsets into each element's row support."""
    q = np.asarray(offsets, dtype=np.int64).reshape(-1)
    r = np.asarray(radii, dtype=np.int64)[np.asarray(row_index, dtype=np.int64)]
    return np.clip(q, -r, r)


def offsets_to_symbols(offsets, radii, row_index) -> np.ndarray:
    q = np.asarray(offsets, dtype=np.int64).reshape(-1)
    r = np.asarray(radii, dtype=np.int64)[np.asarray(row_index, dtype=np.int64)]
    return q + r


def symbols_to_offsets(symbols, radii, row_index) -> np.ndarray:
    s = np.asarray(symbols, dtype=np.int64).reshape(-1)
    r = np.asarray(radii, dtype=np.int64)[np.asarray(row_index, dtype=np.int64)]
    return s - r
