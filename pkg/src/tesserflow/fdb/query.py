"""Index query trees and shard-local doc id sets.

Leaves name an indexed field path; combinators are plain AND/OR/NOT
set algebra.  Geo leaves over areas are conservative (they may admit
extra docs); everything else selects exactly.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass


@dataclass(frozen=True)
class TextMatch:
    path: tuple
    token: str


@dataclass(frozen=True)
class TagEq:
    path: tuple
    value: object


@dataclass(frozen=True)
class RangeBetween:
    """Inclusive bounds; None leaves that side open."""

    path: tuple
    lo: object = None
    hi: object = None


@dataclass(frozen=True)
class LocationIn:
    """region is a LatLngRect (exact at grid precision) or an AreaTree
    (exact against the tree, conservative against its source shape)."""

    path: tuple
    region: object


@dataclass(frozen=True)
class AreaContainsPoint:
    path: tuple
    point: object  # GeoPoint or GridPoint


@dataclass(frozen=True)
class AreaIntersects:
    path: tuple
    area: object  # AreaTree


@dataclass(frozen=True)
class And:
    parts: tuple


@dataclass(frozen=True)
class Or:
    parts: tuple


@dataclass(frozen=True)
class Not:
    part: object


LEAF_TYPES = (TextMatch, TagEq, RangeBetween, LocationIn, AreaContainsPoint, AreaIntersects)


def query_leaves(q):
    """All leaves of a query tree, left to right."""
    if isinstance(q, (And, Or)):
        for p in q.parts:
            yield from query_leaves(p)
    elif isinstance(q, Not):
        yield from query_leaves(q.part)
    else:
        yield q


class DocIdSet:
    """Sorted, deduplicated doc ids."""

    __slots__ = ("_ids",)

    def __init__(self, sorted_ids: tuple):
        self._ids = sorted_ids

    @classmethod
    def from_ids(cls, ids) -> "DocIdSet":
        return cls(tuple(sorted(set(ids))))

    @classmethod
    def empty(cls) -> "DocIdSet":
        return cls(())

    @classmethod
    def full(cls, doc_count: int) -> "DocIdSet":
        return cls(tuple(range(doc_count)))

    def union(self, other: "DocIdSet") -> "DocIdSet":
        return DocIdSet.from_ids(self._ids + other._ids)

    def intersection(self, other: "DocIdSet") -> "DocIdSet":
        a, b = set(self._ids), other._ids
        return DocIdSet(tuple(i for i in b if i in a))

    def difference(self, other: "DocIdSet") -> "DocIdSet":
        b = set(other._ids)
        return DocIdSet(tuple(i for i in self._ids if i not in b))

    def complement(self, doc_count: int) -> "DocIdSet":
        here = set(self._ids)
        return DocIdSet(tuple(i for i in range(doc_count) if i not in here))

    def __iter__(self):
        return iter(self._ids)

    def __len__(self):
        return len(self._ids)

    def __contains__(self, doc_id):
        i = bisect_left(self._ids, doc_id)
        return i < len(self._ids) and self._ids[i] == doc_id

    def __eq__(self, other):
        return isinstance(other, DocIdSet) and self._ids == other._ids

    def __hash__(self):
        return hash(self._ids)

    def __repr__(self):
        if len(self._ids) > 8:
            head = ", ".join(map(str, self._ids[:8]))
            return f"DocIdSet([{head}, ...] len={len(self._ids)})"
        return f"DocIdSet({list(self._ids)})"
