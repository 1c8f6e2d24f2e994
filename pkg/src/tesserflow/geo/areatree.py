"""64-way hierarchical region sets over the Mercator grid.

An area tree represents a set of grid cells.  Every node covers one
cell and is EMPTY, FULL, or PARTIAL with 64 children (an 8x8 split,
i.e. 6 Morton bits per level).  Trees are kept canonical: a PARTIAL
node never has all-FULL or all-EMPTY children, so two trees are
structurally equal iff they contain the same cells at max_level.

Nodes are immutable; trees can be shared freely across workers.
"""

from __future__ import annotations

from typing import Iterable, Iterator

from tesserflow.errors import TesserflowError
from tesserflow.geo.mercator import CellId, GridPoint, cell_digit, morton_encode

MAX_TREE_LEVEL = 10
DEFAULT_MAX_LEVEL = 8

_ALL64 = (1 << 64) - 1


class LevelMismatch(TesserflowError):
    """Operands disagree on max_level."""


class _Sentinel:
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def __repr__(self):
        return self.name

    def __reduce__(self):
        return (_sentinel, (self.name,))


_EMPTY = _Sentinel("EMPTY")
_FULL = _Sentinel("FULL")


def _sentinel(name: str) -> _Sentinel:
    return _EMPTY if name == "EMPTY" else _FULL


class _Node:
    """PARTIAL node: bitmask of FULL children + dict of PARTIAL children."""

    __slots__ = ("full_mask", "partial")

    def __init__(self, full_mask: int, partial: dict):
        self.full_mask = full_mask
        self.partial = partial

    def __eq__(self, other):
        if self is other:
            return True
        return (
            isinstance(other, _Node)
            and self.full_mask == other.full_mask
            and self.partial == other.partial
        )

    def __hash__(self):
        return hash(
            (self.full_mask, tuple(sorted(self.partial.items(), key=lambda kv: kv[0])))
        )

    def __reduce__(self):
        return (_Node, (self.full_mask, self.partial))


def _make(full_mask: int, partial: dict):
    """Canonicalizing node constructor."""
    if not partial:
        if full_mask == 0:
            return _EMPTY
        if full_mask == _ALL64:
            return _FULL
    return _Node(full_mask, partial)


def _child(node, d: int):
    if node is _FULL or node is _EMPTY:
        return node
    if (node.full_mask >> d) & 1:
        return _FULL
    return node.partial.get(d, _EMPTY)


def _digit_support(a, b) -> set:
    digits: set = set()
    for n in (a, b):
        if isinstance(n, _Node):
            mask = n.full_mask
            d = 0
            while mask:
                if mask & 1:
                    digits.add(d)
                mask >>= 1
                d += 1
            digits.update(n.partial)
    return digits


def _union(a, b):
    if a is _FULL or b is _FULL:
        return _FULL
    if a is _EMPTY:
        return b
    if b is _EMPTY:
        return a
    mask = a.full_mask | b.full_mask
    partial: dict = {}
    for d in set(a.partial) | set(b.partial):
        if (mask >> d) & 1:
            continue
        r = _union(a.partial.get(d, _EMPTY), b.partial.get(d, _EMPTY))
        if r is _FULL:
            mask |= 1 << d
        elif r is not _EMPTY:
            partial[d] = r
    return _make(mask, partial)


def _intersection(a, b):
    if a is _EMPTY or b is _EMPTY:
        return _EMPTY
    if a is _FULL:
        return b
    if b is _FULL:
        return a
    mask = a.full_mask & b.full_mask
    partial: dict = {}
    for d in _digit_support(a, b):
        if (mask >> d) & 1:
            continue
        r = _intersection(_child(a, d), _child(b, d))
        if r is _FULL:
            mask |= 1 << d
        elif r is not _EMPTY:
            partial[d] = r
    return _make(mask, partial)


def _difference(a, b):
    if a is _EMPTY or b is _FULL:
        return _EMPTY
    if b is _EMPTY:
        return a
    mask = 0
    partial: dict = {}
    for d in _digit_support(a, b):
        r = _difference(_child(a, d), _child(b, d))
        if r is _FULL:
            mask |= 1 << d
        elif r is not _EMPTY:
            partial[d] = r
    return _make(mask, partial)


def _intersects(a, b) -> bool:
    if a is _EMPTY or b is _EMPTY:
        return False
    if a is _FULL or b is _FULL:
        return True
    if a.full_mask & b.full_mask:
        return True
    for d in set(a.partial) | set(b.partial):
        ca, cb = _child(a, d), _child(b, d)
        if ca is _EMPTY or cb is _EMPTY:
            continue
        if _intersects(ca, cb):
            return True
    return False


class AreaTree:
    """Immutable region set; build via the classmethods or geo.shapes."""

    __slots__ = ("root", "max_level")

    def __init__(self, root, max_level: int):
        if not (0 <= max_level <= MAX_TREE_LEVEL):
            raise ValueError(f"max_level {max_level} outside 0..{MAX_TREE_LEVEL}")
        self.root = root
        self.max_level = max_level

    @classmethod
    def empty(cls, max_level: int = DEFAULT_MAX_LEVEL) -> "AreaTree":
        return cls(_EMPTY, max_level)

    @classmethod
    def full(cls, max_level: int = DEFAULT_MAX_LEVEL) -> "AreaTree":
        return cls(_FULL, max_level)

    @classmethod
    def from_cells(
        cls, cells: Iterable[CellId], max_level: int = DEFAULT_MAX_LEVEL
    ) -> "AreaTree":
        root = _EMPTY
        for cell in cells:
            if cell.level > max_level:
                raise ValueError(f"cell level {cell.level} beyond max_level {max_level}")
            root = _union(root, _path_to_cell(cell))
        return cls(root, max_level)

    @classmethod
    def from_grid_points(
        cls, points: Iterable[GridPoint], max_level: int = DEFAULT_MAX_LEVEL
    ) -> "AreaTree":
        from tesserflow.geo.mercator import cell_of

        return cls.from_cells((cell_of(p, max_level) for p in points), max_level)

    def is_empty(self) -> bool:
        return self.root is _EMPTY

    def is_full(self) -> bool:
        return self.root is _FULL

    def contains(self, g: GridPoint) -> bool:
        node = self.root
        code = morton_encode(g)
        depth = 0
        while True:
            if node is _FULL:
                return True
            if node is _EMPTY:
                return False
            d = cell_digit(code, depth)
            node = _child(node, d)
            depth += 1

    def intersects(self, other: "AreaTree") -> bool:
        self._check_level(other)
        return _intersects(self.root, other.root)

    def cells(self) -> Iterator[CellId]:
        """Canonical FULL cells, in ascending (level-major spatial) code order."""
        yield from _walk_cells(self.root, CellId(0, 0))

    def cell_count(self) -> int:
        return sum(1 for _ in self.cells())

    def _check_level(self, other: "AreaTree"):
        if self.max_level != other.max_level:
            raise LevelMismatch(
                f"max_level {self.max_level} vs {other.max_level}"
            )

    def __eq__(self, other):
        return (
            isinstance(other, AreaTree)
            and self.max_level == other.max_level
            and self.root == other.root
        )

    def __hash__(self):
        return hash((self.max_level, self.root))

    def __repr__(self):
        if self.root is _EMPTY:
            body = "empty"
        elif self.root is _FULL:
            body = "full"
        else:
            body = f"{self.cell_count()} cells"
        return f"AreaTree({body}, max_level={self.max_level})"

    def __reduce__(self):
        return (AreaTree, (self.root, self.max_level))


def _path_to_cell(cell: CellId):
    """Single-cell tree: FULL at the cell, EMPTY elsewhere."""
    node = _FULL
    for depth in reversed(range(cell.level)):
        d = cell_digit(cell.code, depth)
        node = _Node(0, {d: node}) if node is not _FULL else _Node(1 << d, {})
    return node


def _walk_cells(node, cell: CellId) -> Iterator[CellId]:
    if node is _EMPTY:
        return
    if node is _FULL:
        yield cell
        return
    for d in range(64):
        c = _child(node, d)
        if c is _FULL:
            yield cell.child(d)
        elif c is not _EMPTY:
            yield from _walk_cells(c, cell.child(d))


def area_combine(op: str, a: AreaTree, b: AreaTree) -> AreaTree:
    """Set-combine two trees; op is union, intersection, or difference."""
    a._check_level(b)
    if op == "union":
        root = _union(a.root, b.root)
    elif op == "intersection":
        root = _intersection(a.root, b.root)
    elif op == "difference":
        root = _difference(a.root, b.root)
    else:
        raise ValueError(f"unknown combine op {op!r}")
    return AreaTree(root, a.max_level)


def area_query(a: AreaTree, probe) -> bool:
    """Point containment (GridPoint probe) or region intersection (AreaTree)."""
    if isinstance(probe, GridPoint):
        return a.contains(probe)
    if isinstance(probe, AreaTree):
        return a.intersects(probe)
    raise TypeError(f"probe must be GridPoint or AreaTree, got {type(probe).__name__}")


# Rasterization support: build a canonical tree from a cell classifier.

OUTSIDE, INSIDE, OVERLAP = 0, 1, 2


def build_from_classifier(classify, max_level: int) -> AreaTree:
    """Outer-cover rasterizer.

    `classify(x0, y0, span)` reports how the half-open grid square
    [x0, x0+span) x [y0, y0+span) relates to the shape.  OVERLAP cells
    at max_level are included (conservative cover).
    """

    def build(x0: int, y0: int, span: int, level: int):
        c = classify(x0, y0, span)
        if c == OUTSIDE:
            return _EMPTY
        if c == INSIDE or level == max_level:
            return _FULL
        half = span >> 3
        mask = 0
        partial: dict = {}
        for d in range(64):
            xd = (d & 1) | ((d >> 1) & 2) | ((d >> 2) & 4)
            yd = ((d >> 1) & 1) | ((d >> 2) & 2) | ((d >> 3) & 4)
            child = build(x0 + xd * half, y0 + yd * half, half, level + 1)
            if child is _FULL:
                mask |= 1 << d
            elif child is not _EMPTY:
                partial[d] = child
        return _make(mask, partial)

    from tesserflow.geo.mercator import GRID_SIZE

    return AreaTree(build(0, 0, GRID_SIZE, 0), max_level)
