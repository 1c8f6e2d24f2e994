"""Bit-exact key and term encodings for the shard keyspace.

One shard is one ordered table with three keyspaces:

    metadata  M<name>
    postings  I varint(index_id) <term> 0x00 0x00 u32be(doc_id)
    data      D varint(colset_id) u32be(doc_id)

Variable-width terms (text tokens, string tags) escape 0x00 as
0x00 0xFF so the 0x00 0x00 terminator both ends the term unambiguously
and sorts before any continuation byte.  Fixed-width terms use
order-preserving byte encodings, so lexicographic key scans walk values
in numeric (or spatial) order.  The full layout is documented in
docs/fdb-format.md.
"""

from __future__ import annotations

import struct

from tesserflow.bytesutil import encode_varint, read_varint
from tesserflow.errors import TypeError_

META = b"M"
POSTING = b"I"
DATA = b"D"
TERMINATOR = b"\x00\x00"

META_DOC_COUNT = b"Mdoc_count"
META_SHARD_ID = b"Mshard_id"
META_SCHEMA_DIGEST = b"Mschema_digest"

_SIGN = 1 << 63
_MASK64 = (1 << 64) - 1
INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1
UINT64_MAX = (1 << 64) - 1


def escape(raw: bytes) -> bytes:
    return raw.replace(b"\x00", b"\x00\xff")


def unescape(esc: bytes) -> bytes:
    return esc.replace(b"\x00\xff", b"\x00")


def int_term(v: int) -> bytes:
    """Offset-binary: i64 order becomes unsigned byte order."""
    if not INT64_MIN <= v <= INT64_MAX:
        raise TypeError_(f"int term {v} outside 64-bit range")
    return struct.pack(">Q", v + _SIGN)


def uint_term(v: int) -> bytes:
    if not 0 <= v <= UINT64_MAX:
        raise TypeError_(f"uint term {v} outside 64-bit range")
    return struct.pack(">Q", v)


def float_term(v: float) -> bytes:
    """Sign-folded IEEE bits: negatives flip all bits, positives set
    the sign bit, so byte order equals numeric order."""
    if v != v:
        raise TypeError_("NaN is not indexable")
    if v == 0.0:
        v = 0.0  # fold -0.0 onto +0.0 so equal values share a term
    bits = struct.unpack(">Q", struct.pack(">d", v))[0]
    bits = bits ^ _MASK64 if bits & _SIGN else bits | _SIGN
    return struct.pack(">Q", bits)


def bool_term(v: bool) -> bytes:
    return b"\x01" if v else b"\x00"


def string_term(s: str) -> bytes:
    return escape(s.encode("utf-8"))


def location_term(morton_code: int) -> bytes:
    return struct.pack(">Q", morton_code)


def area_term(level: int, code: int) -> bytes:
    return bytes([level]) + struct.pack(">Q", code)


def scalar_term(field_type: str, value) -> bytes:
    """Term for a tag/range value, dispatched on the schema type."""
    if field_type == "bool":
        if not isinstance(value, bool):
            raise TypeError_(f"expected bool term, got {type(value).__name__}")
        return bool_term(value)
    if isinstance(value, bool):
        raise TypeError_(f"expected {field_type} term, got bool")
    if field_type == "int":
        if not isinstance(value, int):
            raise TypeError_(f"expected int term, got {type(value).__name__}")
        return int_term(value)
    if field_type == "uint":
        if not isinstance(value, int):
            raise TypeError_(f"expected uint term, got {type(value).__name__}")
        return uint_term(value)
    if field_type in ("float", "double"):
        if not isinstance(value, (int, float)):
            raise TypeError_(f"expected {field_type} term, got {type(value).__name__}")
        return float_term(float(value))
    if field_type == "string":
        if not isinstance(value, str):
            raise TypeError_(f"expected string term, got {type(value).__name__}")
        return string_term(value)
    raise TypeError_(f"no term encoding for field type {field_type}")


def shard_key_bytes(field_type: str, value) -> bytes:
    """Routing hash input: the raw (unescaped) scalar encoding; null
    hashes as empty so all null-keyed records land together."""
    if value is None:
        return b""
    if field_type == "string":
        return value.encode("utf-8")
    return scalar_term(field_type, value)


def posting_key(index_id: int, term: bytes, doc_id: int) -> bytes:
    return POSTING + encode_varint(index_id) + term + TERMINATOR + struct.pack(">I", doc_id)


def posting_prefix(index_id: int, term: bytes) -> bytes:
    """Prefix shared by every posting of one (index, term)."""
    return POSTING + encode_varint(index_id) + term + TERMINATOR


def index_prefix(index_id: int) -> bytes:
    return POSTING + encode_varint(index_id)


def data_key(colset_id: int, doc_id: int) -> bytes:
    return DATA + encode_varint(colset_id) + struct.pack(">I", doc_id)


def data_prefix(colset_id: int) -> bytes:
    return DATA + encode_varint(colset_id)


def doc_id_of(key: bytes) -> int:
    return int.from_bytes(key[-4:], "big")


def posting_index_id(key: bytes) -> int:
    value, _ = read_varint(key, 1)
    return value


def posting_term(key: bytes, index_id: int) -> bytes:
    """The raw (still escaped, for strings) term inside a posting key."""
    start = 1 + len(encode_varint(index_id))
    return key[start:-6]


def successor(prefix: bytes):
    """Smallest byte string greater than everything prefixed by
    `prefix`, or None when no bound exists (all 0xFF)."""
    b = bytearray(prefix)
    while b:
        if b[-1] != 0xFF:
            b[-1] += 1
            return bytes(b)
        b.pop()
    return None
