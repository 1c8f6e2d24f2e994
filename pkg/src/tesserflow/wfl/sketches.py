"""Probabilistic sketches and the interval tree.

These back hll_count aggregation and the sketch builtins.  All of
them serialize to bytes so partial aggregates can cross a worker
boundary.
"""

from __future__ import annotations

import math
import struct

from tesserflow.bytesutil import fnv1a64, mix64
from tesserflow.errors import BadParam
from tesserflow.wfl.values import stable_key_bytes


def _alpha(m: int) -> float:
    if m == 16:
        return 0.673
    if m == 32:
        return 0.697
    if m == 64:
        return 0.709
    return 0.7213 / (1 + 1.079 / m)


class Hll:
    """HyperLogLog distinct counter, precision 4..16."""

    flow_type_kind = "hll"
    _MAGIC = b"HLL1"

    def __init__(self, precision: int = 14):
        if not isinstance(precision, int) or not 4 <= precision <= 16:
            raise BadParam(f"hll precision must be 4..16, got {precision}")
        self.precision = precision
        self.m = 1 << precision
        self.registers = bytearray(self.m)

    def add(self, value) -> "Hll":
        h = mix64(fnv1a64(stable_key_bytes(value)))
        idx = h >> (64 - self.precision)
        rest = h & ((1 << (64 - self.precision)) - 1)
        # rank: 1-based position of the highest set bit from the top
        # of the remaining 64-p bits; all-zero rest gets the max rank
        width = 64 - self.precision
        rank = width - rest.bit_length() + 1
        if rank > self.registers[idx]:
            self.registers[idx] = rank
        return self

    def merge(self, other: "Hll") -> "Hll":
        if other.precision != self.precision:
            raise BadParam("cannot merge hll sketches of different precision")
        out = Hll(self.precision)
        out.registers = bytearray(max(a, b) for a, b in zip(self.registers, other.registers))
        return out

    def estimate(self) -> int:
        m = self.m
        inv_sum = 0.0
        zeros = 0
        for r in self.registers:
            inv_sum += 2.0 ** -r
            if r == 0:
                zeros += 1
        e = _alpha(m) * m * m / inv_sum
        if e <= 2.5 * m and zeros:
            e = m * math.log(m / zeros)
        return int(round(e))

    def to_bytes(self) -> bytes:
        return self._MAGIC + struct.pack(">B", self.precision) + bytes(self.registers)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Hll":
        if data[:4] != cls._MAGIC:
            raise BadParam("not an hll sketch")
        h = cls(data[4])
        if len(data) != 5 + h.m:
            raise BadParam("truncated hll sketch")
        h.registers = bytearray(data[5:])
        return h

    def __eq__(self, other):
        return (
            isinstance(other, Hll)
            and other.precision == self.precision
            and other.registers == self.registers
        )

    def __repr__(self):
        return f"Hll(p={self.precision}, estimate={self.estimate()})"


class Bloom:
    """Bloom filter sized from an expected count and a target false
    positive rate.  Uses double hashing over one 64-bit hash pair."""

    flow_type_kind = "bloom"
    _MAGIC = b"BLM1"
    _SEED2 = 0x9E3779B97F4A7C15

    def __init__(self, expected: int, fpr: float):
        if not isinstance(expected, int) or expected < 1:
            raise BadParam(f"bloom expected count must be >= 1, got {expected}")
        if not 0.0 < fpr < 1.0:
            raise BadParam(f"bloom false positive rate must be in (0, 1), got {fpr}")
        ln2 = math.log(2.0)
        self.bits = max(8, math.ceil(-expected * math.log(fpr) / (ln2 * ln2)))
        self.hashes = max(1, round(self.bits / expected * ln2))
        self.expected = expected
        self.fpr = fpr
        self.data = bytearray((self.bits + 7) // 8)

    def _positions(self, value):
        b = stable_key_bytes(value)
        h1 = mix64(fnv1a64(b))
        h2 = mix64(fnv1a64(b, seed=self._SEED2)) | 1
        for i in range(self.hashes):
            yield (h1 + i * h2) % self.bits

    def add(self, value) -> "Bloom":
        for pos in self._positions(value):
            self.data[pos >> 3] |= 1 << (pos & 7)
        return self

    def contains(self, value) -> bool:
        return all(self.data[pos >> 3] & (1 << (pos & 7)) for pos in self._positions(value))

    def to_bytes(self) -> bytes:
        head = struct.pack(">QQdI", self.bits, self.expected, self.fpr, self.hashes)
        return self._MAGIC + head + bytes(self.data)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Bloom":
        if data[:4] != cls._MAGIC:
            raise BadParam("not a bloom filter")
        bits, expected, fpr, hashes = struct.unpack(">QQdI", data[4:32])
        b = cls.__new__(cls)
        b.bits, b.expected, b.fpr, b.hashes = bits, expected, fpr, hashes
        b.data = bytearray(data[32:])
        if len(b.data) != (bits + 7) // 8:
            raise BadParam("truncated bloom filter")
        return b

    def __repr__(self):
        return f"Bloom(bits={self.bits}, hashes={self.hashes})"


class _ItNode:
    __slots__ = ("center", "by_lo", "by_hi", "left", "right")

    def __init__(self, center, by_lo, by_hi, left, right):
        self.center = center
        self.by_lo = by_lo  # spanning intervals, ascending lo
        self.by_hi = by_hi  # same intervals, descending hi
        self.left = left
        self.right = right


class IntervalTree:
    """Centered interval tree over closed [lo, hi] intervals."""

    flow_type_kind = "interval_tree"

    def __init__(self, intervals):
        items = []
        for iv in intervals:
            if isinstance(iv, (list, tuple)) and len(iv) == 2:
                lo, hi = iv
            else:
                raise BadParam("intervals must be [lo, hi] pairs")
            if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in (lo, hi)):
                raise BadParam("interval endpoints must be numbers")
            if lo > hi:
                raise BadParam(f"interval lo {lo} exceeds hi {hi}")
            items.append((lo, hi))
        self.size = len(items)
        self._root = self._build(items)

    @classmethod
    def _build(cls, items):
        if not items:
            return None
        points = sorted(p for iv in items for p in iv)
        center = points[len(points) // 2]
        left, right, here = [], [], []
        for iv in items:
            if iv[1] < center:
                left.append(iv)
            elif iv[0] > center:
                right.append(iv)
            else:
                here.append(iv)
        return _ItNode(
            center,
            sorted(here),
            sorted(here, key=lambda iv: -iv[1]),
            cls._build(left),
            cls._build(right),
        )

    def at(self, point):
        """All intervals containing the point, sorted."""
        if isinstance(point, bool) or not isinstance(point, (int, float)):
            raise BadParam("query point must be a number")
        out = []
        node = self._root
        while node is not None:
            if point < node.center:
                for iv in node.by_lo:
                    if iv[0] > point:
                        break
                    out.append(iv)
                node = node.left
            elif point > node.center:
                for iv in node.by_hi:
                    if iv[1] < point:
                        break
                    out.append(iv)
                node = node.right
            else:
                # subtree intervals lie strictly on one side of center
                out.extend(node.by_lo)
                break
        return sorted(out)

    def overlapping(self, lo, hi):
        """All intervals intersecting [lo, hi], sorted."""
        if lo > hi:
            raise BadParam(f"interval lo {lo} exceeds hi {hi}")
        out = []

        def visit(node):
            if node is None:
                return
            if hi < node.center:
                for iv in node.by_lo:
                    if iv[0] > hi:
                        break
                    out.append(iv)
                visit(node.left)
            elif lo > node.center:
                for iv in node.by_hi:
                    if iv[1] < lo:
                        break
                    out.append(iv)
                visit(node.right)
            else:
                out.extend(node.by_lo)
                visit(node.left)
                visit(node.right)

        visit(self._root)
        return sorted(out)

    def __repr__(self):
        return f"IntervalTree(size={self.size})"
