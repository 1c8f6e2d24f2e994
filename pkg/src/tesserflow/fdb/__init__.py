"""Sharded column-first storage with index postings over sorted tables."""

from tesserflow.fdb.build import ValidationError, build_fdb, build_memory_shard
from tesserflow.fdb.dataset import (
    CorruptManifest,
    FdbDataset,
    IndexDescriptor,
    VersionMismatch,
    index_descriptors,
    open_fdb,
)
from tesserflow.fdb.kv import MemTable, OrderedKvTable, SortedTable, write_sorted_table
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
    query_leaves,
)
from tesserflow.fdb.shard import (
    DocIdOutOfRange,
    FdbShard,
    ReadCounters,
    UnindexedField,
    shard_stats,
)

__all__ = [
    "And",
    "AreaContainsPoint",
    "AreaIntersects",
    "CorruptManifest",
    "DocIdOutOfRange",
    "DocIdSet",
    "FdbDataset",
    "FdbShard",
    "IndexDescriptor",
    "LocationIn",
    "MemTable",
    "Not",
    "Or",
    "OrderedKvTable",
    "RangeBetween",
    "ReadCounters",
    "SortedTable",
    "TagEq",
    "TextMatch",
    "UnindexedField",
    "ValidationError",
    "VersionMismatch",
    "build_fdb",
    "build_memory_shard",
    "index_descriptors",
    "open_fdb",
    "query_leaves",
    "shard_stats",
    "write_sorted_table",
]
