/**
 * Byte-exact range coder (rANS flavour) and quantized CDF construction.
 *
 * Frequencies live on a 16-bit grid (total 65536, minimum count 1), the coder
 * state is renormalized a byte at a time above a 2^23 lower bound, and the
 * final state is flushed as 4 bytes.  Every intermediate value stays below
 * 2^32, so plain float64 arithmetic (Math.floor division and %) reproduces
 * the reference streams bit for bit — no BigInt and no 32-bit wrap-around
 * tricks are needed or used.
 */

import { ConfigurationError, DecodeError } from "./errors.js";

export const PROB_BITS = 16;
export const PROB_SCALE = 1 << PROB_BITS;
export const RANS_L = 1 << 23;
/** Per-unit-frequency renormalization bound. */
const RENORM_FACTOR = (RANS_L >> PROB_BITS) << 8;

/**
 * A cumulative frequency row: row[0] = 0, row[last] = 65536, strictly
 * increasing, so symbol s owns the slot range [row[s], row[s + 1]).
 */
export type CdfRow = readonly number[];

export function validateRow(row: CdfRow): void {
  if (row.length < 2) {
    throw new ConfigurationError("a CDF row needs at least two entries");
  }
  if (row[0] !== 0 || row[row.length - 1] !== PROB_SCALE) {
    throw new ConfigurationError(
      `a CDF row must run from 0 to ${PROB_SCALE}, got ${row[0]}..${row[row.length - 1]}`,
    );
  }
  for (let i = 1; i < row.length; i++) {
    if (!Number.isInteger(row[i])) {
      throw new ConfigurationError(`CDF entries must be integers, got ${row[i]}`);
    }
    if (row[i] - row[i - 1] < 1) {
      throw new ConfigurationError("CDF rows must be strictly increasing (min frequency 1)");
    }
  }
}

function rowAt(rows: readonly CdfRow[], index: number, position: number): CdfRow {
  if (!Number.isInteger(index) || index < 0 || index >= rows.length) {
    throw new ConfigurationError(`row index ${index} out of range at position ${position}`);
  }
  return rows[index];
}

/**
 * Encode symbols[j] with CDF rows[rowIndex[j]]; returns the byte stream.
 *
 * Decoding happens in the order given here; the encoder walks the list
 * backwards because the coder is last-in first-out.
 */
export function encodeSymbols(
  symbols: readonly number[],
  rows: readonly CdfRow[],
  rowIndex: readonly number[],
): Uint8Array {
  if (symbols.length !== rowIndex.length) {
    throw new ConfigurationError("symbols and rowIndex must be equally long");
  }
  for (const row of rows) {
    validateRow(row);
  }

  let x = RANS_L;
  const out: number[] = [];
  for (let j = symbols.length - 1; j >= 0; j--) {
    const row = rowAt(rows, rowIndex[j], j);
    const s = symbols[j];
    if (!Number.isInteger(s) || s < 0 || s >= row.length - 1) {
      throw new ConfigurationError(
        `symbol ${s} outside CDF support [0, ${row.length - 1}) at position ${j}`,
      );
    }
    const start = row[s];
    const freq = row[s + 1] - start;
    const xMax = RENORM_FACTOR * freq;
    while (x >= xMax) {
      out.push(x % 256);
      x = Math.floor(x / 256);
    }
    x = Math.floor(x / freq) * PROB_SCALE + (x % freq) + start;
  }
  for (let k = 0; k < 4; k++) {
    out.push(x % 256);
    x = Math.floor(x / 256);
  }
  out.reverse();
  return Uint8Array.from(out);
}

/**
 * Stateful decoder so callers can interleave decoding with parameter
 * computation (later symbols' CDFs may depend on earlier symbols).
 */
export class StreamDecoder {
  private readonly data: Uint8Array;
  private x: number;
  private pos: number;

  constructor(data: Uint8Array) {
    if (data.length < 4) {
      throw new DecodeError(`stream of ${data.length} bytes cannot hold a coder state`);
    }
    this.data = data;
    this.x = data[0] * 0x1000000 + data[1] * 0x10000 + data[2] * 0x100 + data[3];
    this.pos = 4;
  }

  /** Decode the next rowIndex.length symbols. */
  decode(rows: readonly CdfRow[], rowIndex: readonly number[]): number[] {
    for (const row of rows) {
      validateRow(row);
    }
    let { x, pos } = this;
    const data = this.data;
    const symbols = new Array<number>(rowIndex.length);
    for (let j = 0; j < rowIndex.length; j++) {
      const row = rowAt(rows, rowIndex[j], j);
      const slot = x % PROB_SCALE;
      const s = bisectRight(row, slot) - 1;
      const start = row[s];
      const freq = row[s + 1] - start;
      symbols[j] = s;
      x = freq * Math.floor(x / PROB_SCALE) + slot - start;
      while (x < RANS_L) {
        if (pos >= data.length) {
          throw new DecodeError("stream truncated mid-symbol");
        }
        x = x * 256 + data[pos];
        pos += 1;
      }
    }
    this.x = x;
    this.pos = pos;
    return symbols;
  }

  /** Assert the stream was consumed exactly; call after the last symbol. */
  finish(): void {
    if (this.x !== RANS_L || this.pos !== this.data.length) {
      throw new DecodeError("stream did not decode back to the initial coder state");
    }
  }
}

/**
 * Inverse of encodeSymbols; throws DecodeError on truncated or
 * desynchronized streams.
 */
export function decodeSymbols(
  data: Uint8Array,
  rows: readonly CdfRow[],
  rowIndex: readonly number[],
): number[] {
  const dec = new StreamDecoder(data);
  const symbols = dec.decode(rows, rowIndex);
  dec.finish();
  return symbols;
}

/** Round a probability vector onto the 16-bit grid, every bin >= 1. */
export function quantizePmf(pmf: readonly number[]): number[] {
  if (pmf.length === 0) {
    throw new ConfigurationError("pmf must be a non-empty vector");
  }
  if (pmf.length > PROB_SCALE / 2) {
    throw new ConfigurationError(`pmf with ${pmf.length} bins cannot fit the 16-bit grid`);
  }
  const counts = pmf.map((p) => Math.max(1, roundHalfToEven(p * PROB_SCALE)));
  let diff = PROB_SCALE - counts.reduce((a, b) => a + b, 0);
  if (diff > 0) {
    counts[argmaxFirst(counts)] += diff;
  }
  while (diff < 0) {
    const j = argmaxFirst(counts);
    const take = Math.min(counts[j] - 1, -diff);
    counts[j] -= take;
    diff += take;
  }
  return counts;
}

/** Cumulative row for a count vector: [0, c0, c0+c1, ...]. */
export function rowFromCounts(counts: readonly number[]): number[] {
  const row = new Array<number>(counts.length + 1);
  row[0] = 0;
  for (let i = 0; i < counts.length; i++) {
    row[i + 1] = row[i] + counts[i];
  }
  return row;
}

/** Banker's rounding, matching the reference implementation's grid snap. */
function roundHalfToEven(v: number): number {
  const floor = Math.floor(v);
  const frac = v - floor;
  if (frac > 0.5) {
    return floor + 1;
  }
  if (frac < 0.5) {
    return floor;
  }
  return floor % 2 === 0 ? floor : floor + 1;
}

/** Index of the first maximum entry. */
function argmaxFirst(values: readonly number[]): number {
  let best = 0;
  for (let i = 1; i < values.length; i++) {
    if (values[i] > values[best]) {
      best = i;
    }
  }
  return best;
}

/** Rightmost insertion point keeping `row` sorted — upper-bound search. */
function bisectRight(row: CdfRow, value: number): number {
  let lo = 0;
  let hi = row.length;
  while (lo < hi) {
    const mid = (lo + hi) >> 1;
    if (value < row[mid]) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}
