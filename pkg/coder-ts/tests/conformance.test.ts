/**
 * The shared vector files under ../../conformance pin the byte-level coding
 * contract.  The model-side implementation checks the very same files, so a
 * mismatch here means the two components no longer produce identical streams.
 */

import { describe, expect, it } from "vitest";

import { GroupSpec, StreamHeader, pack, unpack } from "../src/container.js";
import { decodeSymbols, encodeSymbols } from "../src/rans.js";
import { fromHex, loadVectors, rowsOf, toHex } from "./helpers.js";

interface RansCase {
  name: string;
  row_counts: number[][];
  row_index: number[];
  symbols: number[];
  bytes: string;
  pmf_bits: number;
}

interface SegmentCase extends RansCase {
  estimated_bits: number;
}

interface ContainerCase {
  name: string;
  height: number;
  width: number;
  sizes: number[];
  scales: number[];
  permutation: number[] | null;
  task: string;
  lam: number;
  segments: string[];
  bytes: string;
}

const RANS_CASES = loadVectors<RansCase[]>("rans_cases.json");
const SEGMENTS = loadVectors<SegmentCase[]>("latent_segments.json");
const CONTAINERS = loadVectors<ContainerCase[]>("container_cases.json");

describe("range coder conformance", () => {
  it.each(RANS_CASES.map((c) => [c.name, c] as const))("%s", (_name, c) => {
    const rows = rowsOf(c.row_counts);
    expect(toHex(encodeSymbols(c.symbols, rows, c.row_index))).toBe(c.bytes);
    expect(decodeSymbols(fromHex(c.bytes), rows, c.row_index)).toEqual(c.symbols);
  });
});

describe("latent segment conformance", () => {
  it("reproduces every frozen segment byte for byte", () => {
    for (const seg of SEGMENTS) {
      const rows = rowsOf(seg.row_counts);
      const data = encodeSymbols(seg.symbols, rows, seg.row_index);
      expect(toHex(data), seg.name).toBe(seg.bytes);
      expect(decodeSymbols(data, rows, seg.row_index), seg.name).toEqual(seg.symbols);
    }
    expect(SEGMENTS.length).toBe(100);
  });

  it("stays within the advertised rate bound on every segment", () => {
    for (const seg of SEGMENTS) {
      const realBits = 8 * fromHex(seg.bytes).length;
      expect(realBits, seg.name).toBeLessThanOrEqual(seg.estimated_bits * 1.02 + 32);
      expect(realBits, seg.name).toBeLessThanOrEqual(seg.pmf_bits * 1.02 + 32);
    }
  });
});

describe("container conformance", () => {
  it.each(CONTAINERS.map((c) => [c.name, c] as const))("%s", (_name, c) => {
    const spec = new GroupSpec(c.sizes, c.scales, c.permutation);
    const header = new StreamHeader(c.height, c.width, spec, c.task, c.lam);
    const segments = c.segments.map(fromHex);
    expect(toHex(pack(header, segments))).toBe(c.bytes);

    const got = unpack(fromHex(c.bytes));
    expect(got.header.height).toBe(c.height);
    expect(got.header.width).toBe(c.width);
    expect(got.header.task).toBe(c.task);
    expect(got.header.lam).toBe(c.lam);
    expect(got.header.spec.sizes).toEqual(c.sizes);
    expect(got.header.spec.scales).toEqual(c.scales);
    expect(got.header.spec.permutation).toEqual(c.permutation);
    expect(got.segments.map(toHex)).toEqual(c.segments);
  });
});
