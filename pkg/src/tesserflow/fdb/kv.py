"""Ordered byte-keyed tables.

Two variants behind one interface: a mutable in-memory map (the
read-write store) and an immutable on-disk sorted table (the shard
file).  Scans yield (key, value) pairs in strict ascending key order,
lo inclusive, hi exclusive.

Sorted table file (documented in docs/fdb-format.md):

    data:    entries `varint(klen) key varint(vlen) value`, ascending,
             grouped into blocks of roughly 4 KiB
    index:   varint(nblocks), then per block
             `varint(offset) varint(klen) first_key`
    trailer: u64le index offset + u32le version + b"TFSTBL1\\n"
"""

from __future__ import annotations

import os
import struct
from bisect import bisect_right

from tesserflow.bytesutil import read_varint, write_varint
from tesserflow.errors import IoError

MAGIC = b"TFSTBL1\n"
VERSION = 1
TRAILER_LEN = 8 + 4 + len(MAGIC)
BLOCK_TARGET = 4096


class OrderedKvTable:
    """Interface: point lookup plus ordered range scan."""

    def get(self, key: bytes):
        raise NotImplementedError

    def scan(self, lo: bytes = b"", hi: bytes = None):
        raise NotImplementedError

    def close(self):
        pass


class MemTable(OrderedKvTable):
    """Mutable variant; put() overwrites silently."""

    def __init__(self):
        self._data = {}
        self._sorted = []
        self._dirty = False

    def put(self, key: bytes, value: bytes):
        if key not in self._data:
            self._dirty = True
        self._data[key] = value

    def delete(self, key: bytes):
        if self._data.pop(key, None) is not None:
            self._dirty = True

    def get(self, key: bytes):
        return self._data.get(key)

    def scan(self, lo: bytes = b"", hi: bytes = None):
        if self._dirty:
            self._sorted = sorted(self._data)
            self._dirty = False
        keys = self._sorted
        i = bisect_right(keys, lo) if lo else 0
        if i and keys[i - 1] == lo:
            i -= 1
        while i < len(keys):
            k = keys[i]
            if hi is not None and k >= hi:
                return
            yield k, self._data[k]
            i += 1

    def __len__(self):
        return len(self._data)


def write_sorted_table(path: str, items) -> int:
    """Write (key, value) pairs, which must arrive in strictly
    ascending key order.  Returns the file size."""
    blocks = []  # (offset, first_key)
    with open(path, "wb") as f:
        offset = 0
        block_start = None
        block_bytes = 0
        prev = None
        for key, value in items:
            if prev is not None and key <= prev:
                raise ValueError(f"keys out of order or duplicated near {key!r}")
            prev = key
            if block_start is None:
                block_start = (offset, key)
                block_bytes = 0
            entry = bytearray()
            write_varint(entry, len(key))
            entry += key
            write_varint(entry, len(value))
            entry += value
            f.write(entry)
            offset += len(entry)
            block_bytes += len(entry)
            if block_bytes >= BLOCK_TARGET:
                blocks.append(block_start)
                block_start = None
        if block_start is not None:
            blocks.append(block_start)
        index_offset = offset
        index = bytearray()
        write_varint(index, len(blocks))
        for boff, first_key in blocks:
            write_varint(index, boff)
            write_varint(index, len(first_key))
            index += first_key
        f.write(index)
        f.write(struct.pack("<QI", index_offset, VERSION))
        f.write(MAGIC)
        return index_offset + len(index) + TRAILER_LEN


class SortedTable(OrderedKvTable):
    """Immutable on-disk table; the block index lives in memory and
    blocks are read (and the last one cached) on demand."""

    def __init__(self, path: str):
        self.path = path
        try:
            self._f = open(path, "rb")
        except OSError as e:
            raise IoError(f"cannot open {path}: {e}") from e
        size = os.fstat(self._f.fileno()).st_size
        if size < TRAILER_LEN:
            raise IoError(f"{path}: too short to be a sorted table")
        self._f.seek(size - TRAILER_LEN)
        trailer = self._f.read(TRAILER_LEN)
        if trailer[12:] != MAGIC:
            raise IoError(f"{path}: bad magic, not a sorted table")
        index_offset, version = struct.unpack("<QI", trailer[:12])
        if version != VERSION:
            raise IoError(f"{path}: sorted table version {version}, expected {VERSION}")
        if index_offset > size - TRAILER_LEN:
            raise IoError(f"{path}: index offset past end of file")
        self.file_size = size
        self._data_end = index_offset
        self._load_index(index_offset, size - TRAILER_LEN - index_offset)
        self._cache = (-1, None)  # (block number, parsed entries)

    def _load_index(self, offset: int, length: int):
        self._f.seek(offset)
        raw = self._f.read(length)
        if len(raw) != length:
            raise IoError(f"{self.path}: truncated index")
        try:
            n, pos = read_varint(raw, 0)
            offsets = []
            first_keys = []
            for _ in range(n):
                boff, pos = read_varint(raw, pos)
                klen, pos = read_varint(raw, pos)
                first_keys.append(raw[pos : pos + klen])
                if len(first_keys[-1]) != klen:
                    raise ValueError("short key")
                pos += klen
                offsets.append(boff)
        except ValueError as e:
            raise IoError(f"{self.path}: corrupt index: {e}") from e
        if pos != length:
            raise IoError(f"{self.path}: trailing bytes in index")
        self._offsets = offsets
        self._first_keys = first_keys

    def _block(self, i: int) -> list:
        if self._cache[0] == i:
            return self._cache[1]
        start = self._offsets[i]
        end = self._offsets[i + 1] if i + 1 < len(self._offsets) else self._data_end
        self._f.seek(start)
        raw = self._f.read(end - start)
        if len(raw) != end - start:
            raise IoError(f"{self.path}: truncated block")
        entries = []
        pos = 0
        try:
            while pos < len(raw):
                klen, pos = read_varint(raw, pos)
                key = raw[pos : pos + klen]
                pos += klen
                vlen, pos = read_varint(raw, pos)
                value = raw[pos : pos + vlen]
                pos += vlen
                if len(key) != klen or len(value) != vlen:
                    raise ValueError("short entry")
                entries.append((key, value))
        except ValueError as e:
            raise IoError(f"{self.path}: corrupt block: {e}") from e
        self._cache = (i, entries)
        return entries

    def _start_block(self, key: bytes) -> int:
        i = bisect_right(self._first_keys, key) - 1
        return max(i, 0)

    def get(self, key: bytes):
        if not self._offsets:
            return None
        for k, v in self._block(self._start_block(key)):
            if k == key:
                return v
            if k > key:
                return None
        return None

    def scan(self, lo: bytes = b"", hi: bytes = None):
        if not self._offsets:
            return
        for i in range(self._start_block(lo), len(self._offsets)):
            for k, v in self._block(i):
                if k < lo:
                    continue
                if hi is not None and k >= hi:
                    return
                yield k, v

    def __len__(self):
        return sum(len(self._block(i)) for i in range(len(self._offsets)))

    def close(self):
        self._f.close()
