"""Decompose a lat/lng rectangle into Morton code ranges.

Works over binary span cells: an aligned code range of size 2^k is a
grid rectangle (the k free suffix bits split alternately between x and
y), so refinement can halve a cell instead of jumping a full 64-way
level.  That keeps covers tight under small range budgets and lets a
degenerate rectangle collapse to a single code.
"""

from __future__ import annotations

import heapq

from tesserflow.geo.mercator import MORTON_BITS, morton_decode
from tesserflow.geo.shapes import LatLngRect

_OUT, _IN, _PART = 0, 1, 2


def _classify(prefix: int, k: int, qx0: int, qy0: int, qx1: int, qy1: int) -> int:
    g = morton_decode(prefix)
    x0, y0 = g.x, g.y
    x1 = x0 + (1 << ((k + 1) // 2)) - 1
    y1 = y0 + (1 << (k // 2)) - 1
    if x0 > qx1 or x1 < qx0 or y0 > qy1 or y1 < qy0:
        return _OUT
    if qx0 <= x0 and x1 <= qx1 and qy0 <= y0 and y1 <= qy1:
        return _IN
    return _PART


def covering_ranges_grid(
    qx0: int, qy0: int, qx1: int, qy1: int, max_cells: int = 64
) -> list:
    """Sorted, disjoint, half-open code ranges covering the inclusive
    grid rect; at most max_cells ranges (before merging)."""
    if max_cells < 1:
        raise ValueError("max_cells must be >= 1")
    if qx0 > qx1 or qy0 > qy1:
        return []

    final = []
    active = []  # heap of (-k, prefix); every entry overlaps the rect
    root = _classify(0, MORTON_BITS, qx0, qy0, qx1, qy1)
    if root == _IN:
        return [(0, 1 << MORTON_BITS)]
    heapq.heappush(active, (-MORTON_BITS, 0))

    total = 1
    while active:
        nk, prefix = active[0]
        k = -nk
        if k == 0:
            break  # single codes cannot be refined further
        kept = []
        for half in (prefix, prefix | (1 << (k - 1))):
            c = _classify(half, k - 1, qx0, qy0, qx1, qy1)
            if c != _OUT:
                kept.append((c, half))
        if total - 1 + len(kept) > max_cells:
            break
        heapq.heappop(active)
        total += len(kept) - 1
        for c, half in kept:
            if c == _IN:
                final.append((-(k - 1), half))
            else:
                heapq.heappush(active, (-(k - 1), half))

    ranges = []
    for nk, prefix in final + active:
        k = -nk
        ranges.append((prefix, prefix + (1 << k)))
    ranges.sort()
    merged = []
    for lo, hi in ranges:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def covering_ranges(rect: LatLngRect, max_cells: int = 64) -> list:
    x0, y0, x1, y1 = rect.grid_bounds()
    return covering_ranges_grid(x0, y0, x1, y1, max_cells)
