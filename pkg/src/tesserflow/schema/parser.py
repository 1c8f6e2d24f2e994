"""Text schema parser.

Format (documented in docs/schema-format.md):

    message Name {
      road_id: uint [index_tag, colset=keys];
      speed: double;
      repeated tags: string [index_tag];
      loc: message { lat: double; lng: double; } [index_location];
      virtual cover: area = circle(loc, 50.0) [index_area(max_level=7)];
    }

`#` starts a comment.  Annotations sit in one bracket list after the
type (or after the closing brace of a sub-message, or after a virtual
field's expression).  Virtual expressions are stored as raw text and
parsed by the query language at ingestion time.
"""

from __future__ import annotations

from tesserflow.errors import SyntaxError_
from tesserflow.schema.model import (
    FIELD_TYPES,
    AnnotationMismatch,
    IndexAnnotation,
    Schema,
    SchemaNode,
)

_ANN_KINDS = ("text", "tag", "range", "location", "area")
_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | set("0123456789")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str, pos=None):
        pos = self.pos if pos is None else pos
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        raise SyntaxError_(message, line, col)

    def skip_ws(self):
        t = self.text
        while self.pos < len(t):
            c = t[self.pos]
            if c in " \t\r\n":
                self.pos += 1
            elif c == "#":
                nl = t.find("\n", self.pos)
                self.pos = len(t) if nl < 0 else nl + 1
            else:
                return

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            self.error(f"expected {ch!r}")
        self.pos += 1

    def ident(self) -> str:
        self.skip_ws()
        start = self.pos
        t = self.text
        if start >= len(t) or t[start] not in _IDENT_START:
            self.error("expected identifier")
        while self.pos < len(t) and t[self.pos] in _IDENT_CONT:
            self.pos += 1
        return t[start : self.pos]

    def try_keyword(self, word: str) -> bool:
        """Consume `word` only when it acts as a prefix keyword (the
        following token is another identifier, not `:`)."""
        self.skip_ws()
        save = self.pos
        t = self.text
        if not t.startswith(word, save):
            return False
        end = save + len(word)
        if end < len(t) and t[end] in _IDENT_CONT:
            return False
        self.pos = end
        if self.peek() == ":":
            self.pos = save
            return False
        return True

    # --- grammar ---

    def parse(self) -> Schema:
        self.skip_ws()
        if not self.try_keyword("message"):
            self.error("schema must start with 'message'")
        name = self.ident()
        self.expect("{")
        root = SchemaNode(name="", type="message")
        self.fields_into(root)
        self.expect("}")
        self.skip_ws()
        if self.pos != len(self.text):
            self.error("trailing input after schema")
        schema = Schema(name, root)
        _check_annotations(schema)
        return schema

    def fields_into(self, parent: SchemaNode):
        while True:
            if self.peek() in ("}", ""):
                return
            parent.children.append(self.field())

    def field(self) -> SchemaNode:
        if self.try_keyword("virtual"):
            return self.virtual_field()
        repeated = self.try_keyword("repeated")
        name = self.ident()
        self.expect(":")
        self.skip_ws()
        type_pos = self.pos
        ftype = self.ident()
        node = SchemaNode(name=name, type=ftype, repeated=repeated)
        if ftype == "message":
            self.expect("{")
            self.fields_into(node)
            self.expect("}")
        elif ftype not in FIELD_TYPES:
            self.error(f"unknown type {ftype!r}", type_pos)
        elif ftype == "area":
            self.error("area fields must be virtual", type_pos)
        if self.peek() == "[":
            self.annotations_into(node)
        self.expect(";")
        return node

    def virtual_field(self) -> SchemaNode:
        name = self.ident()
        self.expect(":")
        self.skip_ws()
        type_pos = self.pos
        ftype = self.ident()
        if ftype not in FIELD_TYPES or ftype == "message":
            self.error(f"virtual field cannot have type {ftype!r}", type_pos)
        self.expect("=")
        expr, ann_text, ann_pos = self.capture_expr()
        if not expr:
            self.error("virtual field needs an expression")
        node = SchemaNode(name=name, type=ftype, virtual_expr=expr)
        if ann_text is not None:
            sub = _Parser(ann_text)
            try:
                sub.annotations_into(node)
                sub.skip_ws()
            except SyntaxError_:
                self.error("malformed annotation list", ann_pos)
            if sub.pos != len(ann_text):
                self.error("malformed annotation list", ann_pos)
        self.expect(";")
        return node

    def capture_expr(self):
        """Raw expression text up to `;` at depth 0.  A final bracket
        group that parses as annotations is split off."""
        self.skip_ws()
        start = self.pos
        t = self.text
        depth = 0
        groups = []  # (open_pos, close_pos) of depth-0 [...] groups
        open_pos = -1
        while self.pos < len(t):
            c = t[self.pos]
            if c == "#":
                nl = t.find("\n", self.pos)
                self.pos = len(t) if nl < 0 else nl
                continue
            if c in "([{":
                if depth == 0 and c == "[":
                    open_pos = self.pos
                depth += 1
            elif c in ")]}":
                depth -= 1
                if depth < 0:
                    self.error("unbalanced bracket in expression")
                if depth == 0 and c == "]":
                    groups.append((open_pos, self.pos))
            elif c == ";" and depth == 0:
                break
            self.pos += 1
        if self.pos >= len(t):
            self.error("unterminated field (missing ';')")
        end = self.pos
        if groups:
            o, c = groups[-1]
            if t[c + 1 : end].strip() == "" and _looks_like_annotations(t[o + 1 : c]):
                return t[start:o].strip(), t[o : c + 1], o
        return t[start:end].strip(), None, -1

    def annotations_into(self, node: SchemaNode):
        self.expect("[")
        while True:
            word = self.ident()
            if word == "colset":
                self.expect("=")
                node.colset = self.ident()
            elif word.startswith("index_") and word[6:] in _ANN_KINDS:
                params = ()
                if self.peek() == "(":
                    self.pos += 1
                    plist = []
                    while True:
                        pname = self.ident()
                        self.expect("=")
                        plist.append((pname, self.int_value()))
                        if self.peek() == ",":
                            self.pos += 1
                            continue
                        break
                    self.expect(")")
                    params = tuple(plist)
                node.annotations.append(IndexAnnotation(word[6:], params))
            else:
                self.error(f"unknown annotation {word!r}")
            if self.peek() == ",":
                self.pos += 1
                continue
            break
        self.expect("]")

    def int_value(self) -> int:
        self.skip_ws()
        start = self.pos
        t = self.text
        while self.pos < len(t) and t[self.pos].isdigit():
            self.pos += 1
        if self.pos == start:
            self.error("expected integer")
        return int(t[start : self.pos])


def _looks_like_annotations(inner: str) -> bool:
    head = inner.strip().split("(")[0].split("=")[0].split(",")[0].strip()
    return head == "colset" or (
        head.startswith("index_") and head[6:] in _ANN_KINDS
    )


_NUMERIC = ("int", "uint", "float", "double")
_TAGGABLE = ("string", "int", "uint", "bool")


def _check_annotations(schema: Schema):
    for path, node, ann in schema.indexed_nodes():
        where = ".".join(path)
        if ann.kind == "text":
            if node.type != "string":
                raise AnnotationMismatch(f"{where}: index_text requires string")
        elif ann.kind == "tag":
            if node.type not in _TAGGABLE:
                raise AnnotationMismatch(f"{where}: index_tag requires {_TAGGABLE}")
        elif ann.kind == "range":
            if node.type not in _NUMERIC:
                raise AnnotationMismatch(f"{where}: index_range requires a numeric type")
        elif ann.kind == "location":
            if node.repeated or not _is_latlng(node):
                raise AnnotationMismatch(
                    f"{where}: index_location requires a singular message{{lat, lng}}"
                )
        elif ann.kind == "area":
            if node.type != "area":
                raise AnnotationMismatch(f"{where}: index_area requires an area field")
            level = ann.param("max_level", 8)
            if not 0 <= level <= 10:
                raise AnnotationMismatch(f"{where}: max_level {level} outside 0..10")
    for path, node in schema.by_path.items():
        where = ".".join(path)
        if node.is_virtual():
            if not node.annotations:
                raise AnnotationMismatch(f"{where}: virtual field must carry an index")
            if node.colset:
                raise AnnotationMismatch(f"{where}: virtual fields are never stored")
        elif node.type == "area":
            raise AnnotationMismatch(f"{where}: area fields must be virtual")


def _is_latlng(node: SchemaNode) -> bool:
    if node.type != "message" or len(node.children) != 2:
        return False
    names = {c.name for c in node.children}
    return names == {"lat", "lng"} and all(
        c.type == "double" and not c.repeated and not c.is_virtual()
        for c in node.children
    )


def parse_schema(text: str) -> Schema:
    return _Parser(text).parse()
