"""Shared low-level helpers: varints, FNV hashing, text tokenizing."""

from __future__ import annotations


def tokenize(text: str) -> list:
    """Lowercase alphanumeric runs; the one tokenizer used for both
    text indexing and text_match, so both sides agree."""
    out = []
    run = []
    for ch in text.lower():
        if ch.isalnum():
            run.append(ch)
        elif run:
            out.append("".join(run))
            run = []
    if run:
        out.append("".join(run))
    return out

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes, seed: int = _FNV_OFFSET) -> int:
    h = seed
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def mix64(h: int) -> int:
    """Finalizer with full avalanche; FNV alone leaves the high bits
    poorly mixed for short, similar keys."""
    h &= _MASK64
    h ^= h >> 33
    h = (h * 0xFF51AFD7ED558CCD) & _MASK64
    h ^= h >> 33
    h = (h * 0xC4CEB9FE1A85EC53) & _MASK64
    h ^= h >> 33
    return h


def write_varint(out: bytearray, value: int):
    """Unsigned LEB128."""
    if value < 0:
        raise ValueError("varint value must be non-negative")
    while True:
        b = value & 0x7F
        value >>= 7
        if value:
            out.append(b | 0x80)
        else:
            out.append(b)
            return


def encode_varint(value: int) -> bytes:
    out = bytearray()
    write_varint(out, value)
    return bytes(out)


def read_varint(buf: bytes, pos: int) -> tuple:
    """Returns (value, new_pos); raises ValueError on truncation."""
    value = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise ValueError("truncated varint")
        b = buf[pos]
        pos += 1
        value |= (b & 0x7F) << shift
        if not b & 0x80:
            return value, pos
        shift += 7
        if shift > 63:
            raise ValueError("varint too long")
