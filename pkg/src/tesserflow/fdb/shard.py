"""Shard reads: index selection, column reads, scans, stats.

Every read increments the shard's counters so callers can account for
postings touched, docs decoded, and bytes pulled per column set; the
query layer sums these into its per-query stats.
"""

from __future__ import annotations

import math
import struct

from tesserflow.errors import IoError, TypeError_
from tesserflow.fdb import keys
from tesserflow.fdb.query import (
    And,
    AreaContainsPoint,
    AreaIntersects,
    DocIdSet,
    LocationIn,
    Not,
    Or,
    RangeBetween,
    TagEq,
    TextMatch,
)
from tesserflow.bytesutil import tokenize
from tesserflow.errors import TesserflowError
from tesserflow.geo import (
    AreaTree,
    GeoPoint,
    GridPoint,
    LatLngRect,
    MAX_TREE_LEVEL,
    OutOfBand,
    cell_of,
    morton_decode,
    project,
)
from tesserflow.geo.cover import covering_ranges_grid
from tesserflow.schema import Record, empty_record, decode_record, parse_path, prune_schema

RECT_COVER_BUDGET = 256


class UnindexedField(TesserflowError):
    pass


class DocIdOutOfRange(TesserflowError):
    pass


class ReadCounters:
    __slots__ = ("postings_read", "docs_read", "bytes_read", "colset_entries")

    def __init__(self):
        self.reset()

    def reset(self):
        self.postings_read = 0
        self.docs_read = 0
        self.bytes_read = 0
        self.colset_entries = {}

    def snapshot(self) -> dict:
        return {
            "postings_read": self.postings_read,
            "docs_read": self.docs_read,
            "bytes_read": self.bytes_read,
            "colset_entries": dict(self.colset_entries),
        }


class FdbShard:
    def __init__(self, shard_id: int, table, schema, indexes):
        self.shard_id = shard_id
        self.table = table
        self.schema = schema
        self.indexes = indexes
        self.counters = ReadCounters()
        self._index_ids = {(d.path, d.kind): d.index_id for d in indexes}
        raw = table.get(keys.META_DOC_COUNT)
        if raw is None or len(raw) != 8:
            raise IoError(f"shard {shard_id}: missing doc count metadata")
        self.doc_count = int.from_bytes(raw, "big")
        digest = table.get(keys.META_SCHEMA_DIGEST)
        if digest is not None and int.from_bytes(digest, "big") != schema.digest():
            raise IoError(f"shard {shard_id}: shard file does not match the schema")

    # --- index selection ---

    def index_select(self, q) -> DocIdSet:
        return DocIdSet.from_ids(self._select(q))

    def _select(self, q) -> set:
        if isinstance(q, And):
            if not q.parts:
                raise TypeError_("AND needs at least one part")
            out = self._select(q.parts[0])
            for p in q.parts[1:]:
                if not out:
                    break
                out &= self._select(p)
            return out
        if isinstance(q, Or):
            if not q.parts:
                raise TypeError_("OR needs at least one part")
            out = set()
            for p in q.parts:
                out |= self._select(p)
            return out
        if isinstance(q, Not):
            return set(range(self.doc_count)) - self._select(q.part)
        return self._leaf(q)

    def _index_id(self, path: tuple, kind: str) -> int:
        idx = self._index_ids.get((tuple(path), kind))
        if idx is None:
            raise UnindexedField(f"no {kind} index on {'.'.join(path)}")
        return idx

    def _scan_postings(self, lo: bytes, hi) -> set:
        ids = set()
        c = self.counters
        for k, _v in self.table.scan(lo, hi):
            c.postings_read += 1
            c.bytes_read += len(k)
            ids.add(keys.doc_id_of(k))
        return ids

    def _term_docs(self, index_id: int, term: bytes) -> set:
        prefix = keys.posting_prefix(index_id, term)
        return self._scan_postings(prefix, keys.successor(prefix))

    def _leaf(self, q) -> set:
        if isinstance(q, TextMatch):
            idx = self._index_id(q.path, "text")
            toks = tokenize(q.token)
            if len(toks) != 1:
                raise TypeError_(f"text leaf needs a single token, got {q.token!r}")
            return self._term_docs(idx, keys.string_term(toks[0]))
        if isinstance(q, TagEq):
            return self._tag(q)
        if isinstance(q, RangeBetween):
            return self._range(q)
        if isinstance(q, LocationIn):
            return self._location(q)
        if isinstance(q, AreaContainsPoint):
            return self._area_point(q)
        if isinstance(q, AreaIntersects):
            return self._area_region(q)
        raise TypeError_(f"not an index query node: {type(q).__name__}")

    def _tag(self, q: TagEq) -> set:
        idx = self._index_id(q.path, "tag")
        node = self.schema.resolve(tuple(q.path))
        v = q.value
        if v is None:
            return set()
        if node.type in ("int", "uint") and isinstance(v, int) and not isinstance(v, bool):
            lo = keys.INT64_MIN if node.type == "int" else 0
            hi = keys.INT64_MAX if node.type == "int" else keys.UINT64_MAX
            if not lo <= v <= hi:
                return set()  # unencodable value cannot be stored
        return self._term_docs(idx, keys.scalar_term(node.type, v))

    def _range(self, q: RangeBetween) -> set:
        idx = self._index_id(q.path, "range")
        node = self.schema.resolve(tuple(q.path))
        prefix = keys.index_prefix(idx)
        if node.type in ("int", "uint"):
            limit_lo = keys.INT64_MIN if node.type == "int" else 0
            limit_hi = keys.INT64_MAX if node.type == "int" else keys.UINT64_MAX
            lo = _int_bound(q.lo, is_lo=True)
            hi = _int_bound(q.hi, is_lo=False)
            if lo == "empty" or hi == "empty":
                return set()
            if lo is not None and lo > limit_hi:
                return set()
            if hi is not None and hi < limit_lo:
                return set()
            lo = None if lo is None or lo <= limit_lo else lo
            hi = None if hi is None or hi >= limit_hi else hi
            if lo is not None and hi is not None and lo > hi:
                return set()
            enc = keys.int_term if node.type == "int" else keys.uint_term
            lo_t = None if lo is None else enc(lo)
            hi_t = None if hi is None else enc(hi)
        else:
            lo_t = None if q.lo is None else keys.float_term(_as_float(q.lo))
            hi_t = None if q.hi is None else keys.float_term(_as_float(q.hi))
            if lo_t is not None and hi_t is not None and lo_t > hi_t:
                return set()
        lo_key = prefix if lo_t is None else prefix + lo_t
        if hi_t is None:
            hi_key = keys.successor(prefix)
        else:
            nxt = keys.successor(hi_t)
            hi_key = keys.successor(prefix) if nxt is None else prefix + nxt
        return self._scan_postings(lo_key, hi_key)

    def _location(self, q: LocationIn) -> set:
        idx = self._index_id(q.path, "location")
        prefix = keys.index_prefix(idx)
        region = q.region
        if isinstance(region, AreaTree):
            ids = set()
            for cell in region.cells():
                lo = prefix + keys.location_term(cell.code)
                hi = prefix + keys.location_term(cell.code + cell.code_span())
                ids |= self._scan_postings(lo, hi)
            return ids
        if not isinstance(region, LatLngRect):
            raise TypeError_(f"location region must be rect or area, got {type(region).__name__}")
        x0, y0, x1, y1 = region.grid_bounds()
        ids = set()
        c = self.counters
        for lo, hi in covering_ranges_grid(x0, y0, x1, y1, RECT_COVER_BUDGET):
            lo_key = prefix + keys.location_term(lo)
            hi_key = prefix + keys.location_term(hi)
            for k, _v in self.table.scan(lo_key, hi_key):
                c.postings_read += 1
                c.bytes_read += len(k)
                code = struct.unpack(">Q", keys.posting_term(k, idx))[0]
                g = morton_decode(code)
                if x0 <= g.x <= x1 and y0 <= g.y <= y1:
                    ids.add(keys.doc_id_of(k))
        return ids

    def _area_point(self, q: AreaContainsPoint) -> set:
        idx = self._index_id(q.path, "area")
        p = q.point
        if isinstance(p, GeoPoint):
            try:
                p = project(p)
            except OutOfBand:
                return set()
        if not isinstance(p, GridPoint):
            raise TypeError_(f"area probe point must be a point, got {type(p).__name__}")
        ids = set()
        for level in range(MAX_TREE_LEVEL + 1):
            cell = cell_of(p, level)
            ids |= self._term_docs(idx, keys.area_term(cell.level, cell.code))
        return ids

    def _area_region(self, q: AreaIntersects) -> set:
        if not isinstance(q.area, AreaTree):
            raise TypeError_(f"area probe must be an area, got {type(q.area).__name__}")
        idx = self._index_id(q.path, "area")
        prefix = keys.index_prefix(idx)
        ids = set()
        seen_ancestors = set()
        for cell in q.area.cells():
            # a stored cell strictly above this one swallows it whole
            for level in range(cell.level):
                span = 1 << (62 - 6 * level)
                anc = cell.code & ~(span - 1)
                term = keys.area_term(level, anc)
                if term not in seen_ancestors:
                    seen_ancestors.add(term)
                    ids |= self._term_docs(idx, term)
            # stored cells at or below it fall inside its code range
            for level in range(cell.level, MAX_TREE_LEVEL + 1):
                lo = prefix + keys.area_term(level, cell.code)
                hi = prefix + keys.area_term(level, cell.code + cell.code_span())
                ids |= self._scan_postings(lo, hi)
        return ids

    # --- column reads ---

    def _read_plan(self, fields):
        if fields is None:
            return list(range(len(self.schema.colsets))), self.schema
        paths = set()
        for f in fields:
            p = parse_path(f) if isinstance(f, str) else tuple(f)
            node = self.schema.resolve(p)
            if node.type == "message":
                for leaf in self.schema.by_path:
                    if leaf[: len(p)] == p:
                        sub = self.schema.by_path[leaf]
                        if sub.type != "message" and not sub.is_virtual():
                            paths.add(leaf)
            elif not node.is_virtual():
                paths.add(p)
        names = self.schema.colsets_for(paths)
        ids = [i for i, cs in enumerate(self.schema.colsets) if cs in names]
        decode_schema = prune_schema(self.schema, paths) if paths else self.schema
        return ids, decode_schema

    def read_docs(self, ids, fields=None):
        colset_ids, decode_schema = self._read_plan(fields)
        ordered = sorted(set(ids))
        for d in ordered:
            if not 0 <= d < self.doc_count:
                raise DocIdOutOfRange(f"doc id {d} outside 0..{self.doc_count - 1}")
        c = self.counters
        for d in ordered:
            rec = empty_record(self.schema)
            for cid in colset_ids:
                v = self.table.get(keys.data_key(cid, d))
                if v is None:
                    raise IoError(f"shard {self.shard_id}: doc {d} missing colset {cid}")
                c.colset_entries[cid] = c.colset_entries.get(cid, 0) + 1
                c.bytes_read += len(v)
                decode_record(decode_schema, v, self.schema.colsets[cid], into=rec)
            c.docs_read += 1
            _fill_shape(self.schema.root, rec)
            yield rec

    def full_scan(self, fields=None):
        colset_ids, decode_schema = self._read_plan(fields)
        c = self.counters
        scans = [
            (cid, self.table.scan(keys.data_prefix(cid), keys.successor(keys.data_prefix(cid))))
            for cid in colset_ids
        ]
        for d in range(self.doc_count):
            rec = empty_record(self.schema)
            for cid, it in scans:
                try:
                    k, v = next(it)
                except StopIteration:
                    raise IoError(f"shard {self.shard_id}: colset {cid} ends at doc {d}")
                if keys.doc_id_of(k) != d:
                    raise IoError(f"shard {self.shard_id}: colset {cid} misses doc {d}")
                c.colset_entries[cid] = c.colset_entries.get(cid, 0) + 1
                c.bytes_read += len(v)
                decode_record(decode_schema, v, self.schema.colsets[cid], into=rec)
            c.docs_read += 1
            _fill_shape(self.schema.root, rec)
            yield rec

    def stats(self) -> dict:
        meta_b = post_b = data_b = 0
        postings = {d.index_id: 0 for d in self.indexes}
        for k, v in self.table.scan():
            n = len(k) + len(v)
            ks = k[:1]
            if ks == keys.META:
                meta_b += n
            elif ks == keys.POSTING:
                post_b += n
                postings[keys.posting_index_id(k)] += 1
            elif ks == keys.DATA:
                data_b += n
            else:
                raise IoError(f"shard {self.shard_id}: unknown keyspace {ks!r}")
        return {
            "doc_count": self.doc_count,
            "bytes": {"metadata": meta_b, "postings": post_b, "data": data_b},
            "postings": postings,
        }

    def __repr__(self):
        return f"FdbShard(id={self.shard_id}, docs={self.doc_count})"


def shard_stats(shard: FdbShard) -> dict:
    return shard.stats()


def _fill_shape(node, rec: Record):
    """Give the record the full schema's field names; fields a pruned
    decode skipped stay null."""
    for c in node.children:
        if c.is_virtual():
            continue
        v = rec.fields.get(c.name)
        if c.repeated:
            if v is None:
                rec.fields[c.name] = v = []
            if c.type == "message":
                for elem in v:
                    _fill_shape(c, elem)
        elif c.type == "message":
            if v is None:
                rec.fields[c.name] = None
            else:
                _fill_shape(c, v)
        elif c.name not in rec.fields:
            rec.fields[c.name] = None


def _as_float(v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError_(f"range bound must be numeric, got {type(v).__name__}")
    if v != v:
        raise TypeError_("NaN range bound")
    try:
        return float(v)
    except OverflowError:
        return math.inf if v > 0 else -math.inf


def _int_bound(v, is_lo: bool):
    """Effective closed integer bound; None = open, "empty" = no
    integer can satisfy the original bound."""
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError_(f"range bound must be numeric, got {type(v).__name__}")
    if isinstance(v, float):
        if v != v:
            raise TypeError_("NaN range bound")
        if v == math.inf:
            return "empty" if is_lo else None
        if v == -math.inf:
            return None if is_lo else "empty"
        return math.ceil(v) if is_lo else math.floor(v)
    return v
