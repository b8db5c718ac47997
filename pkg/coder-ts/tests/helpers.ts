import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";

import { rowFromCounts } from "../src/rans.js";

/** Conformance vectors shared with the model-side implementation. */
export function loadVectors<T>(name: string): T {
  const path = fileURLToPath(new URL(`../../conformance/${name}`, import.meta.url));
  return JSON.parse(readFileSync(path, "utf-8")) as T;
}

export function fromHex(hex: string): Uint8Array {
  return Uint8Array.from(Buffer.from(hex, "hex"));
}

export function toHex(bytes: Uint8Array): string {
  return Buffer.from(bytes).toString("hex");
}

/** Rebuild cumulative CDF rows from the per-row count vectors in a vector file. */
export function rowsOf(rowCounts: number[][]): number[][] {
  return rowCounts.map(rowFromCounts);
}

/** Total information content of a symbol sequence under its quantized rows. */
export function pmfBits(rows: number[][], rowIndex: number[], symbols: number[]): number {
  let bits = 0;
  for (let j = 0; j < symbols.length; j++) {
    const row = rows[rowIndex[j]];
    const freq = row[symbols[j] + 1] - row[symbols[j]];
    bits += -Math.log2(freq / 65536);
  }
  return bits;
}

/** Deterministic 32-bit PRNG for test data (mulberry32). */
export function makeRng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randomInt(rng: () => number, lo: number, hi: number): number {
  return lo + Math.floor(rng() * (hi - lo + 1));
}
