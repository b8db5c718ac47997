import fc from "fast-check";
import { describe, expect, it } from "vitest";

import { ConfigurationError, DecodeError } from "../src/errors.js";
import {
  PROB_SCALE,
  StreamDecoder,
  decodeSymbols,
  encodeSymbols,
  quantizePmf,
  rowFromCounts,
  validateRow,
} from "../src/rans.js";
import { makeRng, pmfBits, randomInt } from "./helpers.js";

const UNIFORM_2 = [0, 32768, 65536];

describe("validateRow", () => {
  it("accepts a minimal and a skewed row", () => {
    validateRow([0, 65536]);
    validateRow([0, 1, 65536]);
  });

  it("rejects rows that are too short", () => {
    expect(() => validateRow([0])).toThrow(ConfigurationError);
    expect(() => validateRow([])).toThrow("at least two entries");
  });

  it("rejects rows with wrong endpoints", () => {
    expect(() => validateRow([1, 65536])).toThrow("must run from 0");
    expect(() => validateRow([0, 65535])).toThrow("must run from 0");
  });

  it("rejects zero-width and descending bins", () => {
    expect(() => validateRow([0, 0, 65536])).toThrow("strictly increasing");
    expect(() => validateRow([0, 65536, 65536])).toThrow("strictly increasing");
    expect(() => validateRow([0, 40000, 30000, 65536])).toThrow("strictly increasing");
  });

  it("rejects fractional entries", () => {
    expect(() => validateRow([0, 0.5, 65536])).toThrow(ConfigurationError);
  });
});

describe("encodeSymbols / decodeSymbols", () => {
  it("codes ~1 bit per symbol for a uniform two-symbol alphabet", () => {
    const rng = makeRng(0xc0de);
    const symbols = Array.from({ length: 1000 }, () => (rng() < 0.5 ? 0 : 1));
    const rowIndex = new Array<number>(1000).fill(0);
    const data = encodeSymbols(symbols, [UNIFORM_2], rowIndex);
    const bits = 8 * data.length;
    expect(bits).toBeGreaterThanOrEqual(1000);
    expect(bits).toBeLessThanOrEqual(1000 * 1.02 + 32);
    expect(decodeSymbols(data, [UNIFORM_2], rowIndex)).toEqual(symbols);
  });

  it("produces a near-zero payload for a single-symbol alphabet", () => {
    const row = [0, PROB_SCALE];
    const symbols = new Array<number>(1000).fill(0);
    const rowIndex = new Array<number>(1000).fill(0);
    const data = encodeSymbols(symbols, [row], rowIndex);
    expect(data.length).toBe(4); // just the flushed coder state
    expect(decodeSymbols(data, [row], rowIndex)).toEqual(symbols);
  });

  it("round-trips an empty symbol sequence as a bare coder state", () => {
    const data = encodeSymbols([], [], []);
    expect(data.length).toBe(4);
    expect(decodeSymbols(data, [], [])).toEqual([]);
  });

  it("supports interleaved decoding through StreamDecoder", () => {
    const rows = [UNIFORM_2, [0, 100, 65536]];
    const symbols = [0, 1, 1, 0, 1, 0];
    const rowIndex = [0, 1, 0, 1, 0, 1];
    const data = encodeSymbols(symbols, rows, rowIndex);
    const dec = new StreamDecoder(data);
    expect(dec.decode(rows, rowIndex.slice(0, 2))).toEqual(symbols.slice(0, 2));
    expect(dec.decode(rows, rowIndex.slice(2))).toEqual(symbols.slice(2));
    dec.finish();
  });

  it("rejects symbols outside the CDF support", () => {
    expect(() => encodeSymbols([2], [UNIFORM_2], [0])).toThrow("outside CDF support");
    expect(() => encodeSymbols([-1], [UNIFORM_2], [0])).toThrow(ConfigurationError);
    expect(() => encodeSymbols([0.5], [UNIFORM_2], [0])).toThrow(ConfigurationError);
  });

  it("rejects mismatched or out-of-range row indices", () => {
    expect(() => encodeSymbols([0, 1], [UNIFORM_2], [0])).toThrow("equally long");
    expect(() => encodeSymbols([0], [UNIFORM_2], [1])).toThrow("row index");
    expect(() => encodeSymbols([0], [UNIFORM_2], [-1])).toThrow("row index");
  });

  it("rejects streams too short to hold a coder state", () => {
    expect(() => new StreamDecoder(Uint8Array.from([1, 2, 3]))).toThrow(DecodeError);
  });

  it("detects truncated streams", () => {
    const rng = makeRng(0xbeef);
    const symbols = Array.from({ length: 200 }, () => randomInt(rng, 0, 1));
    const rowIndex = new Array<number>(200).fill(0);
    const data = encodeSymbols(symbols, [UNIFORM_2], rowIndex);
    expect(() => decodeSymbols(data.subarray(0, data.length - 1), [UNIFORM_2], rowIndex)).toThrow(
      DecodeError,
    );
  });

  it("detects desynchronized decoding through finish()", () => {
    const symbols = [0, 1, 0, 1];
    const rowIndex = [0, 0, 0, 0];
    const data = encodeSymbols(symbols, [UNIFORM_2], rowIndex);
    const dec = new StreamDecoder(data);
    dec.decode([UNIFORM_2], rowIndex.slice(0, 2)); // stop early
    expect(() => dec.finish()).toThrow("did not decode back");
  });

  it("round-trips losslessly over random tables (property)", () => {
    const tableArb = fc
      .array(
        fc.array(fc.integer({ min: 1, max: 1000 }), { minLength: 2, maxLength: 64 }),
        { minLength: 1, maxLength: 4 },
      )
      .map((weightRows) =>
        weightRows.map((weights) => {
          const total = weights.reduce((a, b) => a + b, 0);
          return rowFromCounts(quantizePmf(weights.map((w) => w / total)));
        }),
      );
    const caseArb = tableArb.chain((rows) =>
      fc.tuple(
        fc.constant(rows),
        fc.array(
          fc
            .nat({ max: rows.length - 1 })
            .chain((ri) =>
              fc.tuple(fc.constant(ri), fc.nat({ max: rows[ri].length - 2 })),
            ),
          { maxLength: 256 },
        ),
      ),
    );
    fc.assert(
      fc.property(caseArb, ([rows, pairs]) => {
        const rowIndex = pairs.map(([ri]) => ri);
        const symbols = pairs.map(([, s]) => s);
        const data = encodeSymbols(symbols, rows, rowIndex);
        expect(decodeSymbols(data, rows, rowIndex)).toEqual(symbols);
        const bits = pmfBits(rows, rowIndex, symbols);
        expect(8 * data.length).toBeLessThanOrEqual(bits * 1.02 + 32);
      }),
      { numRuns: 500, seed: 20260819 },
    );
  });
});

describe("quantizePmf", () => {
  it("matches the reference grid snap, including banker's rounding", () => {
    expect(quantizePmf([0.1, 0.2, 0.3, 0.4])).toEqual([6554, 13107, 19661, 26214]);
    expect(quantizePmf([0.5, 0.5])).toEqual([32768, 32768]);
    // 2.5 and 3.5 counts round to even: down to 2, up to 4
    expect(quantizePmf([2.5 / 65536, 3.5 / 65536, 1.0 - 6.0 / 65536])).toEqual([2, 4, 65530]);
  });

  it("redistributes mass to the largest bin when the sum is off grid", () => {
    expect(quantizePmf([0.3, 0.3, 0.3])).toEqual([26214, 19661, 19661]);
    expect(quantizePmf([0.5, 0.5, 0.5])).toEqual([1, 32767, 32768]);
  });

  it("keeps floored bins at a count of one", () => {
    expect(quantizePmf([1e-9, 1.0 - 1e-9])).toEqual([1, 65535]);
  });

  it("matches a frozen many-bin reference case", () => {
    const pmf = [
      0.1255042179393739, 0.25518042049779677, 0.019988066748844537, 8.145631508932357e-7,
      0.2870516591431755, 0.0204686299965768, 0.013278868087202687, 0.07321883181684996,
      0.12395630928640024, 0.004160100765276753, 0.00016389502162944, 0.0770281861337225,
    ];
    expect(quantizePmf(pmf)).toEqual([
      8225, 16724, 1310, 1, 18811, 1341, 870, 4798, 8124, 273, 11, 5048,
    ]);
  });

  it("always yields a valid row summing to 65536 (property)", () => {
    fc.assert(
      fc.property(
        fc.array(fc.double({ min: 1e-12, max: 1.0, noNaN: true }), {
          minLength: 1,
          maxLength: 300,
        }),
        (raw) => {
          const total = raw.reduce((a, b) => a + b, 0);
          const counts = quantizePmf(raw.map((v) => v / total));
          expect(counts.reduce((a, b) => a + b, 0)).toBe(PROB_SCALE);
          expect(Math.min(...counts)).toBeGreaterThanOrEqual(1);
          validateRow(rowFromCounts(counts));
        },
      ),
      { numRuns: 300, seed: 20260819 },
    );
  });

  it("rejects empty and oversized inputs", () => {
    expect(() => quantizePmf([])).toThrow("non-empty");
    const huge = new Array<number>(PROB_SCALE / 2 + 1).fill(1e-6);
    expect(() => quantizePmf(huge)).toThrow("cannot fit");
  });
});
