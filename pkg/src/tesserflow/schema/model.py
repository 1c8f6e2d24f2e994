"""Schema object model, record validation, and pruning.

A schema is a tree of nodes rooted at an unnamed message.  Leaf types
are bool/int/uint/float/double/string; `message` nests; `area` is only
legal on virtual fields (indexed at ingestion, never stored).  Every
stored leaf belongs to a column set: its nearest explicitly annotated
ancestor-or-self, falling back to "default".
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Optional

from tesserflow.bytesutil import fnv1a64
from tesserflow.errors import TesserflowError

SCALAR_TYPES = ("bool", "int", "uint", "float", "double", "string")
FIELD_TYPES = SCALAR_TYPES + ("message", "area")

INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1
UINT64_MAX = (1 << 64) - 1


class SchemaError(TesserflowError):
    pass


class AnnotationMismatch(SchemaError):
    pass


class TypeMismatch(SchemaError):
    pass


class CardinalityMismatch(SchemaError):
    pass


class UnknownField(SchemaError):
    pass


class UnknownPath(SchemaError):
    pass


class UnknownColset(SchemaError):
    pass


@dataclass(frozen=True)
class IndexAnnotation:
    kind: str  # text | tag | range | location | area
    params: tuple = ()  # sorted (name, value) pairs

    def param(self, name, default=None):
        for k, v in self.params:
            if k == name:
                return v
        return default


@dataclass
class SchemaNode:
    name: str
    type: str
    repeated: bool = False
    children: list = field(default_factory=list)
    annotations: list = field(default_factory=list)
    colset: Optional[str] = None  # explicit annotation only
    virtual_expr: Optional[str] = None
    field_id: int = 0  # preorder position, assigned at finalize

    def is_virtual(self) -> bool:
        return self.virtual_expr is not None

    def child(self, name: str) -> Optional["SchemaNode"]:
        for c in self.children:
            if c.name == name:
                return c
        return None


def parse_path(text: str) -> tuple:
    parts = tuple(text.split("."))
    if not all(parts):
        raise UnknownPath(f"malformed path {text!r}")
    return parts


def format_path(path: tuple) -> str:
    return ".".join(path)


class Schema:
    """Immutable after construction; finalize() wires ids and colsets."""

    def __init__(self, name: str, root: SchemaNode):
        self.name = name
        self.root = root
        self.by_path: dict = {}
        self.colsets: list = []  # declaration order
        self._leaf_colset: dict = {}  # path -> colset name
        self._finalize()

    def _finalize(self):
        next_id = [1]
        order: list = []

        def walk(node: SchemaNode, path: tuple, inherited: str):
            cs = node.colset or inherited
            for c in node.children:
                c.field_id = next_id[0]
                next_id[0] += 1
                cpath = path + (c.name,)
                if cpath in self.by_path:
                    raise SchemaError(f"duplicate field {format_path(cpath)}")
                self.by_path[cpath] = c
                child_cs = c.colset or cs
                if c.type == "message":
                    walk(c, cpath, cs)
                elif not c.is_virtual():
                    self._leaf_colset[cpath] = child_cs
                    if child_cs not in order:
                        order.append(child_cs)

        walk(self.root, (), "default")
        self.colsets = order or ["default"]

    def resolve(self, path: tuple) -> SchemaNode:
        node = self.by_path.get(tuple(path))
        if node is None:
            raise UnknownPath(f"no field {format_path(tuple(path))} in schema {self.name}")
        return node

    def leaf_colset(self, path: tuple) -> str:
        cs = self._leaf_colset.get(tuple(path))
        if cs is None:
            raise UnknownPath(f"{format_path(tuple(path))} is not a stored leaf")
        return cs

    def colsets_for(self, paths: Iterable[tuple]) -> list:
        """Column sets covering the given paths (message paths expand to
        their stored descendants), in declaration order."""
        want = set()
        for p in paths:
            p = tuple(p)
            node = self.resolve(p)
            if node.type == "message":
                for lp, cs in self._leaf_colset.items():
                    if lp[: len(p)] == p:
                        want.add(cs)
            elif not node.is_virtual():
                want.add(self._leaf_colset[p])
        return [c for c in self.colsets if c in want]

    def indexed_nodes(self):
        """(path, node, annotation) for every index annotation, in
        declaration order."""
        out = []

        def walk(node, path):
            for c in node.children:
                cpath = path + (c.name,)
                for a in c.annotations:
                    out.append((cpath, c, a))
                if c.type == "message":
                    walk(c, cpath)

        walk(self.root, ())
        return out

    def node_count(self) -> int:
        return 1 + len(self.by_path)

    def print(self) -> str:
        """Canonical text form; parse(print()) reproduces the schema."""
        lines = [f"message {self.name} {{"]

        def ann_text(node):
            parts = []
            for a in node.annotations:
                if a.params:
                    inner = ", ".join(f"{k}={v}" for k, v in a.params)
                    parts.append(f"index_{a.kind}({inner})")
                else:
                    parts.append(f"index_{a.kind}")
            if node.colset:
                parts.append(f"colset={node.colset}")
            return f" [{', '.join(parts)}]" if parts else ""

        def walk(node, indent):
            pad = "  " * indent
            for c in node.children:
                rep = "repeated " if c.repeated else ""
                if c.is_virtual():
                    lines.append(
                        f"{pad}virtual {c.name}: {c.type} = {c.virtual_expr}{ann_text(c)};"
                    )
                elif c.type == "message":
                    lines.append(f"{pad}{rep}{c.name}: message {{")
                    walk(c, indent + 1)
                    lines.append(f"{pad}}}{ann_text(c)};")
                else:
                    lines.append(f"{pad}{rep}{c.name}: {c.type}{ann_text(c)};")

        walk(self.root, 1)
        lines.append("}")
        return "\n".join(lines) + "\n"

    def digest(self) -> int:
        return fnv1a64(self.print().encode("utf-8"))

    def __eq__(self, other):
        return isinstance(other, Schema) and self.print() == other.print()

    def __hash__(self):
        return hash(self.print())

    def __repr__(self):
        return f"Schema({self.name}, {len(self.by_path)} nodes)"


class Record:
    """Field-name -> value mapping; values are None, bool, int, float,
    str, Record (message), or list (repeated)."""

    __slots__ = ("fields",)

    def __init__(self, fields: dict):
        self.fields = fields

    def get(self, name: str):
        return self.fields.get(name)

    def get_path(self, path: tuple):
        v = self
        for name in path:
            if v is None:
                return None
            if not isinstance(v, Record):
                raise TypeMismatch(f"{name} accessed on non-message value")
            v = v.fields.get(name)
        return v

    def __eq__(self, other):
        return isinstance(other, Record) and self.fields == other.fields

    def __hash__(self):
        return hash(tuple(sorted((k, _hashable(v)) for k, v in self.fields.items())))

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in self.fields.items())
        return f"Record({inner})"


def _hashable(v):
    if isinstance(v, list):
        return tuple(_hashable(x) for x in v)
    return v


def _quantize_float(v: float) -> float:
    return struct.unpack("<f", struct.pack("<f", v))[0]


def _validate_scalar(node: SchemaNode, value, path: str):
    t = node.type
    if t == "bool":
        if not isinstance(value, bool):
            raise TypeMismatch(f"{path}: expected bool, got {type(value).__name__}")
        return value
    if isinstance(value, bool):
        raise TypeMismatch(f"{path}: expected {t}, got bool")
    if t == "int":
        if not isinstance(value, int):
            raise TypeMismatch(f"{path}: expected int, got {type(value).__name__}")
        if not INT64_MIN <= value <= INT64_MAX:
            raise TypeMismatch(f"{path}: int out of 64-bit range")
        return value
    if t == "uint":
        if not isinstance(value, int):
            raise TypeMismatch(f"{path}: expected uint, got {type(value).__name__}")
        if not 0 <= value <= UINT64_MAX:
            raise TypeMismatch(f"{path}: uint out of range")
        return value
    if t in ("float", "double"):
        if not isinstance(value, (int, float)):
            raise TypeMismatch(f"{path}: expected {t}, got {type(value).__name__}")
        value = float(value)
        return _quantize_float(value) if t == "float" else value
    if t == "string":
        if not isinstance(value, str):
            raise TypeMismatch(f"{path}: expected string, got {type(value).__name__}")
        return value
    raise TypeMismatch(f"{path}: cannot hold a value of type {t}")


def _validate_node(node: SchemaNode, value, path: str):
    if node.type == "message":
        if not isinstance(value, dict):
            raise TypeMismatch(f"{path}: expected object, got {type(value).__name__}")
        return _validate_fields(node, value, path)
    return _validate_scalar(node, value, path)


def _validate_fields(node: SchemaNode, raw: dict, path: str) -> Record:
    fields = {}
    for key in raw:
        child = node.child(key)
        kpath = f"{path}.{key}" if path else key
        if child is None:
            raise UnknownField(f"unknown field {kpath}")
        if child.is_virtual():
            raise UnknownField(f"{kpath} is virtual and cannot carry data")
    for child in node.children:
        if child.is_virtual():
            continue
        kpath = f"{path}.{child.name}" if path else child.name
        value = raw.get(child.name)
        if child.repeated:
            if value is None:
                fields[child.name] = []
                continue
            if not isinstance(value, list):
                raise CardinalityMismatch(f"{kpath}: expected array")
            out = []
            for i, elem in enumerate(value):
                if elem is None:
                    raise TypeMismatch(f"{kpath}[{i}]: null element in repeated field")
                out.append(_validate_node(child, elem, f"{kpath}[{i}]"))
            fields[child.name] = out
        else:
            if isinstance(value, list):
                raise CardinalityMismatch(f"{kpath}: field is singular")
            fields[child.name] = None if value is None else _validate_node(child, value, kpath)
    return Record(fields)


def validate_record(schema: Schema, raw: dict) -> Record:
    if not isinstance(raw, dict):
        raise TypeMismatch("record must be an object")
    return _validate_fields(schema.root, raw, "")


def prune_schema(schema: Schema, used: Iterable[tuple]) -> Schema:
    """Keep exactly the used paths plus their ancestors.

    Field ids are preserved so records encoded under the full schema
    decode correctly under the pruned one.
    """
    keep = set()
    for p in used:
        p = tuple(p)
        schema.resolve(p)
        for i in range(1, len(p) + 1):
            keep.add(p[:i])

    def copy(node: SchemaNode, path: tuple) -> SchemaNode:
        kids = []
        for c in node.children:
            cpath = path + (c.name,)
            if cpath in keep:
                kids.append(copy(c, cpath))
        cp = SchemaNode(
            name=node.name,
            type=node.type,
            repeated=node.repeated,
            children=kids,
            annotations=list(node.annotations),
            colset=node.colset,
            virtual_expr=node.virtual_expr,
        )
        cp.field_id = node.field_id
        return cp

    pruned = Schema.__new__(Schema)
    pruned.name = schema.name
    pruned.root = copy(schema.root, ())
    pruned.by_path = {}
    pruned.colsets = schema.colsets
    pruned._leaf_colset = {}

    def index(node, path, inherited):
        cs = node.colset or inherited
        for c in node.children:
            cpath = path + (c.name,)
            pruned.by_path[cpath] = c
            child_cs = c.colset or cs
            if c.type == "message":
                index(c, cpath, cs)
            elif not c.is_virtual():
                pruned._leaf_colset[cpath] = child_cs

    index(pruned.root, (), "default")
    return pruned
