"""Dataset directory layout: a text manifest plus one table per shard.

The manifest pins everything a reader needs: format version, shard
count, shard key, index ids, colset ids, per-shard file names and doc
counts, and the full schema text.  Index and colset ids are positions
in schema declaration order; the manifest spells them out anyway so a
reader can detect drift instead of silently misreading postings.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from tesserflow.errors import TesserflowError
from tesserflow.schema import Schema, format_path, parse_schema

MANIFEST_NAME = "manifest.txt"
FORMAT_NAME = "tesserflow-fdb"
FORMAT_VERSION = 1


class CorruptManifest(TesserflowError):
    pass


class VersionMismatch(TesserflowError):
    pass


@dataclass(frozen=True)
class IndexDescriptor:
    index_id: int
    kind: str
    path: tuple


def index_descriptors(schema: Schema) -> list:
    """Ids follow schema declaration order, starting at 0."""
    return [
        IndexDescriptor(i, ann.kind, path)
        for i, (path, _node, ann) in enumerate(schema.indexed_nodes())
    ]


def shard_file_name(shard_id: int) -> str:
    return f"shard-{shard_id:05d}.tfst"


class FdbDataset:
    def __init__(self, root: str, schema: Schema, num_shards: int, shard_key,
                 shard_files: list, doc_counts: list):
        self.root = root
        self.schema = schema
        self.num_shards = num_shards
        self.shard_key = shard_key  # path tuple or None
        self.shard_files = shard_files
        self.doc_counts = doc_counts
        self.indexes = index_descriptors(schema)
        self._shards = {}

    def total_docs(self) -> int:
        return sum(self.doc_counts)

    def shard_path(self, i: int) -> str:
        return os.path.join(self.root, self.shard_files[i])

    def open_shard(self, i: int):
        if not 0 <= i < self.num_shards:
            raise ValueError(f"shard {i} outside 0..{self.num_shards - 1}")
        shard = self._shards.get(i)
        if shard is None:
            from tesserflow.fdb.kv import SortedTable
            from tesserflow.fdb.shard import FdbShard

            shard = FdbShard(i, SortedTable(self.shard_path(i)), self.schema, self.indexes)
            self._shards[i] = shard
        return shard

    def close(self):
        for shard in self._shards.values():
            shard.table.close()
        self._shards.clear()

    def __repr__(self):
        return (
            f"FdbDataset({self.schema.name}, {self.num_shards} shards, "
            f"{self.total_docs()} docs)"
        )


def write_manifest(dataset: FdbDataset):
    lines = [f"{FORMAT_NAME} {FORMAT_VERSION}"]
    lines.append(f"name {dataset.schema.name}")
    lines.append(f"shards {dataset.num_shards}")
    key = format_path(dataset.shard_key) if dataset.shard_key else "-"
    lines.append(f"shard_key {key}")
    for d in dataset.indexes:
        lines.append(f"index {d.index_id} {d.kind} {format_path(d.path)}")
    for i, cs in enumerate(dataset.schema.colsets):
        lines.append(f"colset {i} {cs}")
    for i in range(dataset.num_shards):
        lines.append(f"shard {i} {dataset.shard_files[i]} {dataset.doc_counts[i]}")
    schema_text = dataset.schema.print()
    lines.append(f"schema {len(schema_text.splitlines())}")
    lines.append(schema_text.rstrip("\n"))
    with open(os.path.join(dataset.root, MANIFEST_NAME), "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def _manifest_error(path, line_no, message):
    return CorruptManifest(f"{path}:{line_no}: {message}")


def open_fdb(root: str) -> FdbDataset:
    path = os.path.join(root, MANIFEST_NAME)
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise CorruptManifest(f"cannot read manifest: {e}") from e
    if not lines:
        raise CorruptManifest(f"{path}: empty manifest")
    head = lines[0].split()
    if len(head) != 2 or head[0] != FORMAT_NAME:
        raise CorruptManifest(f"{path}:1: not a {FORMAT_NAME} manifest")
    if head[1] != str(FORMAT_VERSION):
        raise VersionMismatch(f"{path}: format version {head[1]}, expected {FORMAT_VERSION}")

    name = None
    num_shards = None
    shard_key = None
    indexes = []
    colsets = []
    shard_rows = {}
    schema = None

    i = 1
    while i < len(lines):
        line = lines[i]
        i += 1
        if not line.strip():
            continue
        parts = line.split()
        tag = parts[0]
        try:
            if tag == "name" and len(parts) == 2:
                name = parts[1]
            elif tag == "shards" and len(parts) == 2:
                num_shards = int(parts[1])
            elif tag == "shard_key" and len(parts) == 2:
                shard_key = None if parts[1] == "-" else tuple(parts[1].split("."))
            elif tag == "index" and len(parts) == 4:
                indexes.append(IndexDescriptor(int(parts[1]), parts[2], tuple(parts[3].split("."))))
            elif tag == "colset" and len(parts) == 3:
                colsets.append((int(parts[1]), parts[2]))
            elif tag == "shard" and len(parts) == 4:
                shard_rows[int(parts[1])] = (parts[2], int(parts[3]))
            elif tag == "schema" and len(parts) == 2:
                n = int(parts[1])
                body = lines[i : i + n]
                if len(body) != n:
                    raise _manifest_error(path, i, "truncated schema block")
                i += n
                schema = parse_schema("\n".join(body) + "\n")
            else:
                raise _manifest_error(path, i, f"unrecognized line {line!r}")
        except CorruptManifest:
            raise
        except (ValueError, TesserflowError) as e:
            raise _manifest_error(path, i, str(e)) from e

    if schema is None or num_shards is None or name is None:
        raise CorruptManifest(f"{path}: missing required sections")
    if schema.name != name:
        raise CorruptManifest(f"{path}: schema name {schema.name!r} != declared {name!r}")
    if num_shards < 1 or sorted(shard_rows) != list(range(num_shards)):
        raise CorruptManifest(f"{path}: shard rows do not cover 0..{num_shards}-1")
    expected = [(d.index_id, d.kind, d.path) for d in index_descriptors(schema)]
    if [(d.index_id, d.kind, d.path) for d in indexes] != expected:
        raise CorruptManifest(f"{path}: index descriptors disagree with schema")
    if [c for _, c in sorted(colsets)] != schema.colsets:
        raise CorruptManifest(f"{path}: colset list disagrees with schema")
    if shard_key is not None:
        try:
            schema.resolve(shard_key)
        except TesserflowError as e:
            raise CorruptManifest(f"{path}: bad shard key: {e}") from e

    shard_files = [shard_rows[i][0] for i in range(num_shards)]
    doc_counts = [shard_rows[i][1] for i in range(num_shards)]
    for fname in shard_files:
        if not os.path.exists(os.path.join(root, fname)):
            raise CorruptManifest(f"{path}: missing shard file {fname}")
    return FdbDataset(root, schema, num_shards, shard_key, shard_files, doc_counts)
