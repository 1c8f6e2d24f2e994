"""AST nodes and the canonical printer.

The printer parenthesizes every compound expression, so printing and
reparsing reaches a fixpoint after one round; plan fingerprints hash
this canonical text.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

STAGE_OPS = frozenset(
    {
        "find",
        "filter",
        "map",
        "flatten",
        "sort_asc",
        "sort_desc",
        "limit",
        "distinct",
        "aggregate",
        "join",
        "sub_flow",
        "sample",
        "collect",
        "save",
    }
)


class Node:
    __slots__ = ()


@dataclass(frozen=True)
class Literal(Node):
    value: object  # None, bool, int, float, str

    def __repr__(self):
        return f"Literal({self.value!r})"


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Member(Node):
    obj: Node
    name: str


@dataclass(frozen=True)
class Index(Node):
    obj: Node
    index: Node


@dataclass(frozen=True)
class Call(Node):
    func: Node  # Var or Member
    args: tuple


@dataclass(frozen=True)
class Unary(Node):
    op: str  # - | not
    operand: Node


@dataclass(frozen=True)
class Binary(Node):
    op: str  # + - * / % == != < <= > >= and or
    left: Node
    right: Node


@dataclass(frozen=True)
class Between(Node):
    value: Node
    lo: Node
    hi: Node


@dataclass(frozen=True)
class InOp(Node):
    value: Node
    container: Node


@dataclass(frozen=True)
class ArrayLit(Node):
    items: tuple


@dataclass(frozen=True)
class DictLit(Node):
    entries: tuple  # ((name, expr), ...)


@dataclass(frozen=True)
class Lambda(Node):
    param: str
    body: tuple  # statements; value of the last one is the result


@dataclass(frozen=True)
class Let(Node):
    name: str
    expr: Node


@dataclass(frozen=True)
class Stage(Node):
    op: str
    args: tuple
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Pipeline(Node):
    source: Node
    stages: tuple


def _quote(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\r":
            out.append("\\r")
        elif ch == "\0":
            out.append("\\0")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def print_ast(node) -> str:
    p = print_ast
    if isinstance(node, Literal):
        v = node.value
        if v is None:
            return "null"
        if v is True:
            return "true"
        if v is False:
            return "false"
        if isinstance(v, str):
            return _quote(v)
        if isinstance(v, float):
            return repr(v)
        return str(v)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Member):
        return f"{p(node.obj)}.{node.name}"
    if isinstance(node, Index):
        return f"{p(node.obj)}[{p(node.index)}]"
    if isinstance(node, Call):
        args = ", ".join(p(a) for a in node.args)
        return f"{p(node.func)}({args})"
    if isinstance(node, Unary):
        sep = " " if node.op == "not" else ""
        return f"({node.op}{sep}{p(node.operand)})"
    if isinstance(node, Binary):
        return f"({p(node.left)} {node.op} {p(node.right)})"
    if isinstance(node, Between):
        return f"({p(node.value)} between {p(node.lo)} and {p(node.hi)})"
    if isinstance(node, InOp):
        return f"({p(node.value)} in {p(node.container)})"
    if isinstance(node, ArrayLit):
        return "[" + ", ".join(p(i) for i in node.items) + "]"
    if isinstance(node, DictLit):
        inner = ", ".join(f"{k}: {p(v)}" for k, v in node.entries)
        return "{" + inner + "}"
    if isinstance(node, Lambda):
        if len(node.body) == 1 and not isinstance(node.body[0], Let):
            return f"{node.param} => {p(node.body[0])}"
        stmts = "; ".join(p(s) for s in node.body)
        return f"{node.param} => {{ {stmts} }}"
    if isinstance(node, Let):
        return f"let {node.name} = {p(node.expr)}"
    if isinstance(node, Stage):
        args = ", ".join(p(a) for a in node.args)
        return f"{node.op}({args})"
    if isinstance(node, Pipeline):
        chain = "".join("." + p(s) for s in node.stages)
        return f"{p(node.source)}{chain}"
    raise TypeError(f"cannot print {type(node).__name__}")


def print_statements(stmts) -> str:
    return ";;\n".join(print_ast(s) for s in stmts) + ";;"
