"""Ingestion: route records to shards, extract index terms, write
shard tables and the manifest.

Doc ids are dense per shard, assigned in arrival order of that shard's
records.  Virtual fields are evaluated here (against the record's
top-level fields), indexed, and then dropped; they never reach the
data keyspace.
"""

from __future__ import annotations

import os

from tesserflow.bytesutil import fnv1a64, tokenize
from tesserflow.errors import TesserflowError
from tesserflow.fdb import keys
from tesserflow.fdb.dataset import FdbDataset, open_fdb, shard_file_name, write_manifest
from tesserflow.fdb.kv import MemTable, write_sorted_table
from tesserflow.geo import AreaTree, GeoPoint, morton_encode, project
from tesserflow.schema import Record, Schema, encode_record, format_path, validate_record
from tesserflow.wfl.eval import EvalContext, eval_expr
from tesserflow.wfl.parser import parse_expr


class ValidationError(TesserflowError):
    pass


def _values_at(rec: Record, path: tuple) -> list:
    """Non-null values at a path, flattening repeated levels."""
    vals = [rec]
    for name in path:
        nxt = []
        for v in vals:
            if v is None:
                continue
            v = v.fields.get(name)
            if isinstance(v, list):
                nxt.extend(v)
            elif v is not None:
                nxt.append(v)
        vals = nxt
    return vals


class _VirtualEval:
    """Per-schema cache of parsed virtual expressions."""

    def __init__(self, schema: Schema):
        self.exprs = {}
        for path, node in schema.by_path.items():
            if node.is_virtual():
                self.exprs[path] = (node, parse_expr(node.virtual_expr))

    def value(self, path: tuple, rec: Record):
        node, expr = self.exprs[path]
        ctx = EvalContext(globals=dict(rec.fields))
        value = eval_expr(expr, ctx)
        if value is None:
            return None
        if node.type == "area":
            if not isinstance(value, AreaTree):
                raise ValidationError(
                    f"{format_path(path)}: expression produced "
                    f"{type(value).__name__}, expected an area"
                )
        return value


def _location_terms(values, path) -> set:
    terms = set()
    for v in values:
        if not isinstance(v, Record):
            raise ValidationError(f"{format_path(path)}: location value must be a message")
        lat, lng = v.fields.get("lat"), v.fields.get("lng")
        if lat is None or lng is None:
            continue
        terms.add(keys.location_term(morton_encode(project(GeoPoint(lat, lng)))))
    return terms


def _extract_terms(kind: str, node, values, path) -> set:
    if kind == "text":
        return {keys.string_term(tok) for v in values for tok in tokenize(v)}
    if kind == "tag":
        return {keys.scalar_term(node.type, v) for v in values}
    if kind == "range":
        return {keys.scalar_term(node.type, v) for v in values}
    if kind == "location":
        return _location_terms(values, path)
    if kind == "area":
        terms = set()
        for tree in values:
            for cell in tree.cells():
                terms.add(keys.area_term(cell.level, cell.code))
        return terms
    raise ValidationError(f"{format_path(path)}: unknown index kind {kind}")


def doc_entries(schema: Schema, rec: Record, doc_id: int, virtuals: _VirtualEval) -> list:
    """All (key, value) pairs one document contributes."""
    entries = []
    for cid, colset in enumerate(schema.colsets):
        entries.append((keys.data_key(cid, doc_id), encode_record(schema, rec, colset)))
    for index_id, (path, node, ann) in enumerate(schema.indexed_nodes()):
        if node.is_virtual():
            v = virtuals.value(path, rec)
            values = [] if v is None else [v]
        else:
            values = _values_at(rec, path)
        try:
            terms = _extract_terms(ann.kind, node, values, path)
        except TesserflowError as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError(f"{format_path(path)}: {e}") from e
        for term in terms:
            entries.append((keys.posting_key(index_id, term, doc_id), b""))
    return entries


def _meta_entries(shard_id: int, doc_count: int, schema: Schema) -> list:
    return [
        (keys.META_DOC_COUNT, doc_count.to_bytes(8, "big")),
        (keys.META_SCHEMA_DIGEST, schema.digest().to_bytes(8, "big")),
        (keys.META_SHARD_ID, shard_id.to_bytes(4, "big")),
    ]


def route(schema: Schema, shard_key, rec: Record, num_shards: int, arrival: int) -> int:
    if shard_key is None:
        return arrival % num_shards
    node = schema.resolve(shard_key)
    value = rec.get_path(shard_key)
    return fnv1a64(keys.shard_key_bytes(node.type, value)) % num_shards


def _check_shard_key(schema: Schema, shard_key):
    if shard_key is None:
        return None
    path = tuple(shard_key.split(".")) if isinstance(shard_key, str) else tuple(shard_key)
    node = schema.resolve(path)
    if node.type == "message" or node.repeated or node.is_virtual():
        raise ValidationError(
            f"shard key {format_path(path)} must be a stored scalar field"
        )
    return path


def build_fdb(schema: Schema, records, num_shards: int, shard_key=None,
              out_dir: str = None) -> FdbDataset:
    """Ingest and open the result.  `records` yields raw dicts (which
    are validated) or pre-validated Record objects."""
    if num_shards < 1:
        raise ValueError("num_shards must be >= 1")
    if out_dir is None:
        raise ValueError("out_dir is required")
    shard_key = _check_shard_key(schema, shard_key)
    virtuals = _VirtualEval(schema)

    per_shard = [[] for _ in range(num_shards)]
    for i, raw in enumerate(records):
        try:
            rec = raw if isinstance(raw, Record) else validate_record(schema, raw)
            shard = route(schema, shard_key, rec, num_shards, i)
        except TesserflowError as e:
            raise ValidationError(f"record {i}: {e}") from e
        per_shard[shard].append((i, rec))

    os.makedirs(out_dir, exist_ok=True)
    ds = FdbDataset(out_dir, schema, num_shards, shard_key,
                    [shard_file_name(i) for i in range(num_shards)],
                    [len(docs) for docs in per_shard])
    for shard_id, docs in enumerate(per_shard):
        entries = _meta_entries(shard_id, len(docs), schema)
        for doc_id, (arrival, rec) in enumerate(docs):
            try:
                entries.extend(doc_entries(schema, rec, doc_id, virtuals))
            except TesserflowError as e:
                raise ValidationError(f"record {arrival}: {e}") from e
        entries.sort(key=lambda kv: kv[0])
        write_sorted_table(ds.shard_path(shard_id), entries)
    write_manifest(ds)
    return open_fdb(out_dir)


def build_memory_shard(schema: Schema, records, shard_id: int = 0):
    """One read-write shard over a MemTable; the store behind saved
    intermediate flows and small tests."""
    from tesserflow.fdb.shard import FdbShard

    virtuals = _VirtualEval(schema)
    table = MemTable()
    recs = []
    for i, raw in enumerate(records):
        try:
            recs.append(raw if isinstance(raw, Record) else validate_record(schema, raw))
        except TesserflowError as e:
            raise ValidationError(f"record {i}: {e}") from e
    for k, v in _meta_entries(shard_id, len(recs), schema):
        table.put(k, v)
    for doc_id, rec in enumerate(recs):
        for k, v in doc_entries(schema, rec, doc_id, virtuals):
            table.put(k, v)
    from tesserflow.fdb.dataset import index_descriptors

    return FdbShard(shard_id, table, schema, index_descriptors(schema))
