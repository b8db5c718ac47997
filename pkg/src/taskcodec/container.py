"""Bitstream container: header, length-prefixed segments, trailing checksum.

Everything is little-endian.  Layout:

    magic      4 bytes  "TCBS"
    version    u16      currently 1
    height     u16      image height in pixels
    width      u16      image width in pixels
    channels   u16      latent channel count C
    n_groups   u8
    sizes      n x u16
    scales     n x f64
    perm flag  u8       0 = identity, 1 = explicit
    perm       C x u16  only when the flag is 1
    task len   u8       UTF-8 byte length of the task id
    task id    bytes
    lambda     f64      rate weight the model was trained with
    segments   u8       segment count: hyper first, then groups 0..n-1
    per segment: u32 payload length + payload
    checksum   u32      CRC32 of every byte above
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

from taskcodec.errors import ConfigurationError, DecodeError
from taskcodec.grouping import GroupSpec

MAGIC = b"TCBS"
VERSION = 1


@dataclass
class StreamHeader:
    height: int
    width: int
    spec: GroupSpec
    task: str
    lam: float

    @property
    def channels(self) -> int:
        return self.spec.channels


def pack(header: StreamHeader, segments: list[bytes]) -> bytes:
    if not 0 < header.height <= 0xFFFF or not 0 < header.width <= 0xFFFF:
        raise ConfigurationError(
            f"image dims {header.height}x{header.width} do not fit the header"
        )
    if len(segments) != header.spec.n_groups + 1:
        raise ConfigurationError(
            f"expected {header.spec.n_groups + 1} segments (hyper + groups), "
            f"got {len(segments)}"
        )
    task_bytes = header.task.encode("utf-8")
    if len(task_bytes) > 0xFF:
        raise ConfigurationError(f"task id {header.task!r} is too long to serialize")

    spec = header.spec
    out = bytearray()
    out += MAGIC
    out += struct.pack("<HHHH", VERSION, header.height, header.width, spec.channels)
    out += struct.pack("<B", spec.n_groups)
    out += struct.pack(f"<{spec.n_groups}H", *spec.sizes)
    out += struct.pack(f"<{spec.n_groups}d", *spec.scales)
    if spec.permutation is None:
        out += struct.pack("<B", 0)
    else:
        out += struct.pack("<B", 1)
        out += struct.pack(f"<{spec.channels}H", *spec.permutation)
    out += struct.pack("<B", len(task_bytes))
    out += task_bytes
    out += struct.pack("<d", header.lam)
    out += struct.pack("<B", len(segments))
    for seg in segments:
        out += struct.pack("<I", len(seg))
        out += seg
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise DecodeError(
                f"stream truncated: wanted {n} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos}"
            )
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def unpack(data: bytes) -> tuple[StreamHeader, list[bytes]]:
    if len(data) < 4:
        raise DecodeError("stream shorter than the checksum field")
    stored = struct.unpack("<I", data[-4:])[0]
    actual = zlib.crc32(data[:-4]) & 0xFFFFFFFF
    if stored != actual:
        raise DecodeError(f"checksum mismatch: stored {stored:#010x}, computed {actual:#010x}")

    r = _Reader(data[:-4])
    if r.take(4) != MAGIC:
        raise DecodeError("bad magic: not a codec stream")
    version, height, width, channels = r.unpack("<HHHH")
    if version != VERSION:
        raise DecodeError(f"unsupported stream version {version} (expected {VERSION})")
    (n_groups,) = r.unpack("<B")
    sizes = r.unpack(f"<{n_groups}H")
    scales = r.unpack(f"<{n_groups}d")
    (perm_flag,) = r.unpack("<B")
    permutation = r.unpack(f"<{channels}H") if perm_flag else None
    (task_len,) = r.unpack("<B")
    task = r.take(task_len).decode("utf-8")
    (lam,) = r.unpack("<d")
    (segment_count,) = r.unpack("<B")
    segments = []
    for _ in range(segment_count):
        (length,) = r.unpack("<I")
        segments.append(r.take(length))
    if r.pos != len(r.data):
        raise DecodeError(f"{len(r.data) - r.pos} trailing bytes after the last segment")

    if sum(sizes) != channels:
        raise DecodeError(f"header sizes {sizes} do not sum to {channels} channels")
    spec = GroupSpec(tuple(sizes), tuple(scales), permutation)
    if segment_count != spec.n_groups + 1:
        raise DecodeError(
            f"expected {spec.n_groups + 1} segments for {spec.n_groups} groups, "
            f"got {segment_count}"
        )
    return StreamHeader(height, width, spec, task, lam), segments
