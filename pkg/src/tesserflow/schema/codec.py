"""Per-column-set record encoding.

Tag-length-value: varint(field_id) + varint(len) + payload, fields in
declaration order.  Length prefixes make unknown fields skippable, so
records encoded under a full schema decode under a pruned one.  Null
singular fields and empty repeated fields are simply absent; an
all-null record encodes to zero bytes.
"""

from __future__ import annotations

import struct

from tesserflow.bytesutil import read_varint, write_varint
from tesserflow.schema.model import (
    Record,
    Schema,
    SchemaNode,
    TypeMismatch,
    UnknownColset,
)


def empty_record(schema_or_node) -> Record:
    node = schema_or_node.root if isinstance(schema_or_node, Schema) else schema_or_node
    fields = {}
    for c in node.children:
        if c.is_virtual():
            continue
        fields[c.name] = [] if c.repeated else None
    return Record(fields)


def _scalar_payload(node: SchemaNode, value) -> bytes:
    t = node.type
    if t == "bool":
        return b"\x01" if value else b"\x00"
    if t == "int":
        return struct.pack(">q", value)
    if t == "uint":
        return struct.pack(">Q", value)
    if t == "float":
        return struct.pack(">f", value)
    if t == "double":
        return struct.pack(">d", value)
    if t == "string":
        return value.encode("utf-8")
    raise TypeMismatch(f"cannot encode field of type {t}")


def _scalar_decode(node: SchemaNode, payload: bytes):
    t = node.type
    if t == "bool":
        return payload != b"\x00"
    if t == "int":
        return struct.unpack(">q", payload)[0]
    if t == "uint":
        return struct.unpack(">Q", payload)[0]
    if t == "float":
        return struct.unpack(">f", payload)[0]
    if t == "double":
        return struct.unpack(">d", payload)[0]
    if t == "string":
        return payload.decode("utf-8")
    raise TypeMismatch(f"cannot decode field of type {t}")


class _ColsetView:
    """Which nodes participate in one colset's encoding."""

    def __init__(self, schema: Schema, colset: str):
        if colset not in schema.colsets:
            raise UnknownColset(f"colset {colset!r} not declared in schema {schema.name}")
        self.included = set()  # ids of nodes to emit

        def walk(node, path, inherited) -> bool:
            cs = node.colset or inherited
            any_included = False
            for c in node.children:
                child_cs = c.colset or cs
                if c.type == "message":
                    if walk(c, path + (c.name,), cs):
                        self.included.add(c.field_id)
                        any_included = True
                elif not c.is_virtual() and child_cs == colset:
                    self.included.add(c.field_id)
                    any_included = True
            return any_included

        walk(schema.root, (), "default")


def _view(schema: Schema, colset: str) -> _ColsetView:
    views = getattr(schema, "_codec_views", None)
    if views is None:
        views = {}
        schema._codec_views = views
    view = views.get(colset)
    if view is None:
        view = _ColsetView(schema, colset)
        views[colset] = view
    return view


def _encode_message(node: SchemaNode, rec: Record, included: set, out: bytearray):
    for c in node.children:
        if c.field_id not in included:
            continue
        value = rec.fields.get(c.name)
        if c.repeated:
            if not value:
                continue
            body = bytearray()
            write_varint(body, len(value))
            for elem in value:
                payload = (
                    _message_payload(c, elem, included)
                    if c.type == "message"
                    else _scalar_payload(c, elem)
                )
                write_varint(body, len(payload))
                body += payload
            write_varint(out, c.field_id)
            write_varint(out, len(body))
            out += body
        else:
            if value is None:
                continue
            payload = (
                _message_payload(c, value, included)
                if c.type == "message"
                else _scalar_payload(c, value)
            )
            write_varint(out, c.field_id)
            write_varint(out, len(payload))
            out += payload


def _message_payload(node: SchemaNode, rec: Record, included: set) -> bytes:
    out = bytearray()
    _encode_message(node, rec, included, out)
    return bytes(out)


def encode_record(schema: Schema, record: Record, colset: str) -> bytes:
    out = bytearray()
    _encode_message(schema.root, record, _view(schema, colset).included, out)
    return bytes(out)


def _decode_message(node: SchemaNode, data: bytes, rec: Record):
    by_id = {c.field_id: c for c in node.children}
    pos = 0
    while pos < len(data):
        fid, pos = read_varint(data, pos)
        length, pos = read_varint(data, pos)
        payload = data[pos : pos + length]
        if len(payload) != length:
            raise ValueError("truncated field payload")
        pos += length
        c = by_id.get(fid)
        if c is None:
            continue  # field pruned away; skip
        if c.repeated:
            count, p = read_varint(payload, 0)
            out = []
            for _ in range(count):
                elen, p = read_varint(payload, p)
                epay = payload[p : p + elen]
                if len(epay) != elen:
                    raise ValueError("truncated element payload")
                p += elen
                if c.type == "message":
                    sub = empty_record(c)
                    _decode_message(c, epay, sub)
                    out.append(sub)
                else:
                    out.append(_scalar_decode(c, epay))
            rec.fields[c.name] = out
        elif c.type == "message":
            sub = rec.fields.get(c.name)
            if not isinstance(sub, Record):
                sub = empty_record(c)
                rec.fields[c.name] = sub
            _decode_message(c, payload, sub)
        else:
            rec.fields[c.name] = _scalar_decode(c, payload)


def decode_record(schema: Schema, data: bytes, colset: str, into: Record = None) -> Record:
    _view(schema, colset)  # validates the colset name
    rec = into if into is not None else empty_record(schema)
    _decode_message(schema.root, data, rec)
    return rec
