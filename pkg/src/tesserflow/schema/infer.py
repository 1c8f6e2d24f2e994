"""Derive a fresh schema from the expressions a stage emits.

The heavy lifting (expression typing) lives in the query language's
type checker; this wraps its result as a Schema so stage outputs can
be encoded across worker boundaries and drive REPL completion.
"""

from __future__ import annotations

from tesserflow.errors import TypeError_
from tesserflow.schema.model import SCALAR_TYPES, Schema, SchemaNode


def schema_from_field_types(name: str, field_types: list) -> Schema:
    """field_types: [(name, FlowType)] in output order."""
    root = SchemaNode(name="", type="message")
    for fname, ftype in field_types:
        root.children.append(_node_from_type(fname, ftype))
    return Schema(name, root)


def _node_from_type(name: str, ftype) -> SchemaNode:
    from tesserflow.wfl.types import FlowType  # local: avoid import cycle

    if not isinstance(ftype, FlowType):
        raise TypeError_(f"field {name}: not a type: {ftype!r}")
    kind = ftype.kind
    if kind == "vector":
        inner = _node_from_type(name, ftype.elem)
        if inner.repeated:
            raise TypeError_(f"field {name}: nested vectors cannot cross a stage boundary")
        inner.repeated = True
        return inner
    if kind == "point":
        # points lower to their wire shape
        node = SchemaNode(name=name, type="message")
        node.children = [
            SchemaNode(name="lat", type="double"),
            SchemaNode(name="lng", type="double"),
        ]
        return node
    if kind == "record":
        node = SchemaNode(name=name, type="message")
        node.children = [_node_from_type(n, t) for n, t in ftype.fields]
        return node
    if kind == "null":
        # a field that is always null still needs a wire type
        return SchemaNode(name=name, type="string")
    if kind in SCALAR_TYPES:
        return SchemaNode(name=name, type=kind)
    raise TypeError_(f"field {name}: {kind} values cannot cross a stage boundary")


def infer_stage_schema(output_fields, input_schema: Schema) -> Schema:
    """output_fields: [(name, Expr)] evaluated against input_schema."""
    from tesserflow.wfl import types as wt

    env = wt.TypeEnv.for_schema(input_schema)
    pairs = []
    for fname, expr in output_fields:
        pairs.append((fname, wt.infer_expr_type(expr, env)))
    return schema_from_field_types(f"{input_schema.name}_stage", pairs)
