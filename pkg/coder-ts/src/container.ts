/**
 * Bitstream container: header, length-prefixed segments, trailing checksum.
 *
 * Everything is little-endian.  Layout:
 *
 *     magic      4 bytes  "TCBS"
 *     version    u16      currently 1
 *     height     u16      image height in pixels
 *     width      u16      image width in pixels
 *     channels   u16      latent channel count C
 *     n_groups   u8
 *     sizes      n x u16
 *     scales     n x f64
 *     perm flag  u8       0 = identity, 1 = explicit
 *     perm       C x u16  only when the flag is 1
 *     task len   u8       UTF-8 byte length of the task id
 *     task id    bytes
 *     lambda     f64      rate weight the model was trained with
 *     segments   u8       segment count: hyper first, then groups 0..n-1
 *     per segment: u32 payload length + payload
 *     checksum   u32      CRC32 of every byte above
 */

import { ConfigurationError, DecodeError } from "./errors.js";

export const MAGIC = Uint8Array.from([0x54, 0x43, 0x42, 0x53]); // "TCBS"
export const VERSION = 1;

const U8_MAX = 0xff;
const U16_MAX = 0xffff;
const U32_MAX = 0xffffffff;

/**
 * Channel partition and per-group scales for a latent with sum(sizes)
 * channels.  permutation is the channel order applied before grouping:
 * output channel j reads input channel permutation[j]; null means identity.
 */
export class GroupSpec {
  readonly sizes: readonly number[];
  readonly scales: readonly number[];
  readonly permutation: readonly number[] | null;

  constructor(
    sizes: readonly number[],
    scales: readonly number[],
    permutation: readonly number[] | null = null,
  ) {
    if (sizes.length === 0) {
      throw new ConfigurationError("GroupSpec needs at least one group");
    }
    if (sizes.length !== scales.length) {
      throw new ConfigurationError(
        `sizes (${sizes.length}) and scales (${scales.length}) differ in length`,
      );
    }
    if (sizes.some((s) => !Number.isInteger(s) || s <= 0)) {
      throw new ConfigurationError(`group sizes must be positive, got ${sizes}`);
    }
    if (scales[0] !== 1.0) {
      throw new ConfigurationError(`the first group scale must be 1, got ${scales[0]}`);
    }
    for (let i = 1; i < scales.length; i++) {
      if (scales[i] < 1.0) {
        throw new ConfigurationError(`scales must be >= 1, got ${scales[i]}`);
      }
      if (scales[i - 1] > scales[i]) {
        throw new ConfigurationError(
          `scales must be non-decreasing, got ${scales[i - 1]} before ${scales[i]}`,
        );
      }
    }
    const channels = sizes.reduce((a, b) => a + b, 0);
    if (permutation !== null) {
      const sorted = [...permutation].sort((a, b) => a - b);
      if (sorted.length !== channels || sorted.some((p, i) => p !== i)) {
        throw new ConfigurationError("permutation must be a bijection over channel indices");
      }
    }
    this.sizes = [...sizes];
    this.scales = [...scales];
    this.permutation = permutation === null ? null : [...permutation];
  }

  get nGroups(): number {
    return this.sizes.length;
  }

  get channels(): number {
    return this.sizes.reduce((a, b) => a + b, 0);
  }
}

export class StreamHeader {
  constructor(
    readonly height: number,
    readonly width: number,
    readonly spec: GroupSpec,
    readonly task: string,
    readonly lam: number,
  ) {}

  get channels(): number {
    return this.spec.channels;
  }
}

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

/** CRC32 (polynomial 0xEDB88320), identical to zlib's crc32. */
export function crc32(data: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < data.length; i++) {
    c = CRC_TABLE[(c ^ data[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

class Writer {
  private readonly view: DataView;
  readonly bytes: Uint8Array;
  pos = 0;

  constructor(size: number) {
    this.bytes = new Uint8Array(size);
    this.view = new DataView(this.bytes.buffer);
  }

  raw(chunk: Uint8Array): void {
    this.bytes.set(chunk, this.pos);
    this.pos += chunk.length;
  }

  u8(value: number): void {
    this.view.setUint8(this.pos, value);
    this.pos += 1;
  }

  u16(value: number): void {
    this.view.setUint16(this.pos, value, true);
    this.pos += 2;
  }

  u32(value: number): void {
    this.view.setUint32(this.pos, value, true);
    this.pos += 4;
  }

  f64(value: number): void {
    this.view.setFloat64(this.pos, value, true);
    this.pos += 8;
  }
}

function checkRange(value: number, max: number, what: string): void {
  if (!Number.isInteger(value) || value < 0 || value > max) {
    throw new ConfigurationError(`${what} ${value} does not fit the header field`);
  }
}

export function pack(header: StreamHeader, segments: readonly Uint8Array[]): Uint8Array {
  const spec = header.spec;
  if (
    !Number.isInteger(header.height) ||
    !Number.isInteger(header.width) ||
    header.height <= 0 ||
    header.height > U16_MAX ||
    header.width <= 0 ||
    header.width > U16_MAX
  ) {
    throw new ConfigurationError(
      `image dims ${header.height}x${header.width} do not fit the header`,
    );
  }
  if (segments.length !== spec.nGroups + 1) {
    throw new ConfigurationError(
      `expected ${spec.nGroups + 1} segments (hyper + groups), got ${segments.length}`,
    );
  }
  const taskBytes = new TextEncoder().encode(header.task);
  if (taskBytes.length > U8_MAX) {
    throw new ConfigurationError(`task id ${JSON.stringify(header.task)} is too long to serialize`);
  }
  checkRange(spec.channels, U16_MAX, "channel count");
  checkRange(spec.nGroups, U8_MAX, "group count");
  for (const size of spec.sizes) {
    checkRange(size, U16_MAX, "group size");
  }
  for (const seg of segments) {
    checkRange(seg.length, U32_MAX, "segment length");
  }

  const size =
    MAGIC.length +
    8 + // version, height, width, channels
    1 +
    2 * spec.nGroups +
    8 * spec.nGroups +
    1 +
    (spec.permutation === null ? 0 : 2 * spec.channels) +
    1 +
    taskBytes.length +
    8 +
    1 +
    segments.reduce((a, s) => a + 4 + s.length, 0) +
    4;

  const w = new Writer(size);
  w.raw(MAGIC);
  w.u16(VERSION);
  w.u16(header.height);
  w.u16(header.width);
  w.u16(spec.channels);
  w.u8(spec.nGroups);
  for (const s of spec.sizes) {
    w.u16(s);
  }
  for (const s of spec.scales) {
    w.f64(s);
  }
  if (spec.permutation === null) {
    w.u8(0);
  } else {
    w.u8(1);
    for (const p of spec.permutation) {
      w.u16(p);
    }
  }
  w.u8(taskBytes.length);
  w.raw(taskBytes);
  w.f64(header.lam);
  w.u8(segments.length);
  for (const seg of segments) {
    w.u32(seg.length);
    w.raw(seg);
  }
  w.u32(crc32(w.bytes.subarray(0, w.pos)));
  return w.bytes;
}

class Reader {
  private readonly view: DataView;
  readonly data: Uint8Array;
  pos = 0;

  constructor(data: Uint8Array) {
    this.data = data;
    this.view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  }

  take(n: number): Uint8Array {
    if (this.pos + n > this.data.length) {
      throw new DecodeError(
        `stream truncated: wanted ${n} bytes at offset ${this.pos}, ` +
          `have ${this.data.length - this.pos}`,
      );
    }
    const chunk = this.data.subarray(this.pos, this.pos + n);
    this.pos += n;
    return chunk;
  }

  u8(): number {
    this.take(1);
    return this.view.getUint8(this.pos - 1);
  }

  u16(): number {
    this.take(2);
    return this.view.getUint16(this.pos - 2, true);
  }

  u32(): number {
    this.take(4);
    return this.view.getUint32(this.pos - 4, true);
  }

  f64(): number {
    this.take(8);
    return this.view.getFloat64(this.pos - 8, true);
  }
}

export interface UnpackedStream {
  header: StreamHeader;
  segments: Uint8Array[];
}

export function unpack(data: Uint8Array): UnpackedStream {
  if (data.length < 4) {
    throw new DecodeError("stream shorter than the checksum field");
  }
  const body = data.subarray(0, data.length - 4);
  const stored = new DataView(data.buffer, data.byteOffset + data.length - 4, 4).getUint32(0, true);
  const actual = crc32(body);
  if (stored !== actual) {
    throw new DecodeError(`checksum mismatch: stored ${hex32(stored)}, computed ${hex32(actual)}`);
  }

  const r = new Reader(body);
  const magic = r.take(4);
  if (!bytesEqual(magic, MAGIC)) {
    throw new DecodeError("bad magic: not a codec stream");
  }
  const version = r.u16();
  const height = r.u16();
  const width = r.u16();
  const channels = r.u16();
  if (version !== VERSION) {
    throw new DecodeError(`unsupported stream version ${version} (expected ${VERSION})`);
  }
  const nGroups = r.u8();
  const sizes: number[] = [];
  for (let i = 0; i < nGroups; i++) {
    sizes.push(r.u16());
  }
  const scales: number[] = [];
  for (let i = 0; i < nGroups; i++) {
    scales.push(r.f64());
  }
  const permFlag = r.u8();
  let permutation: number[] | null = null;
  if (permFlag !== 0) {
    permutation = [];
    for (let i = 0; i < channels; i++) {
      permutation.push(r.u16());
    }
  }
  const taskLen = r.u8();
  const taskBytes = r.take(taskLen);
  let task: string;
  try {
    task = new TextDecoder("utf-8", { fatal: true }).decode(taskBytes);
  } catch {
    throw new DecodeError("task id is not valid UTF-8");
  }
  const lam = r.f64();
  const segmentCount = r.u8();
  const segments: Uint8Array[] = [];
  for (let i = 0; i < segmentCount; i++) {
    const length = r.u32();
    segments.push(Uint8Array.from(r.take(length)));
  }
  if (r.pos !== body.length) {
    throw new DecodeError(`${body.length - r.pos} trailing bytes after the last segment`);
  }

  if (sizes.reduce((a, b) => a + b, 0) !== channels) {
    throw new DecodeError(`header sizes ${sizes} do not sum to ${channels} channels`);
  }
  const spec = new GroupSpec(sizes, scales, permutation);
  if (segmentCount !== spec.nGroups + 1) {
    throw new DecodeError(
      `expected ${spec.nGroups + 1} segments for ${spec.nGroups} groups, got ${segmentCount}`,
    );
  }
  return { header: new StreamHeader(height, width, spec, task, lam), segments };
}

function bytesEqual(a: Uint8Array, b: Uint8Array): boolean {
  if (a.length !== b.length) {
    return false;
  }
  for (let i = 0; i < a.length; i++) {
    if (a[i] !== b[i]) {
      return false;
    }
  }
  return true;
}

function hex32(value: number): string {
  return "0x" + value.toString(16).padStart(8, "0");
}
