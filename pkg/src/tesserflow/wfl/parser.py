"""Recursive-descent parser.

Precedence, loosest first: or, and, comparisons/between/in, additive,
multiplicative, unary, postfix.  All binary operators associate left.
After `=>` a brace opens a dict literal when it starts with `name:`,
otherwise a statement block; the same rule applies everywhere a brace
can begin an expression.

Postfix chains whose calls name flow operators (find, filter, map,
flatten, sort_asc, sort_desc, limit, distinct, aggregate, join,
sub_flow, sample, collect, save) are materialized as Pipeline nodes.
"""

from __future__ import annotations

from tesserflow.errors import SyntaxError_
from tesserflow.wfl.ast import (
    ArrayLit,
    Between,
    Binary,
    Call,
    DictLit,
    Index,
    InOp,
    Lambda,
    Let,
    Literal,
    Member,
    Pipeline,
    STAGE_OPS,
    Stage,
    Unary,
    Var,
)
from tesserflow.wfl.lexer import Token, tokenize

_KEYWORDS = {"let", "and", "or", "not", "between", "in", "true", "false", "null"}
_CMP_OPS = ("==", "!=", "<=", ">=", "<", ">")


class _Parser:
    def __init__(self, tokens: list):
        self.tokens = tokens
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def error(self, message, tok=None):
        tok = tok or self.tok
        raise SyntaxError_(message, tok.line, tok.col)

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "EOF":
            self.pos += 1
        return t

    def at_op(self, *ops) -> bool:
        return self.tok.kind == "OP" and self.tok.value in ops

    def at_kw(self, word) -> bool:
        return self.tok.kind == "IDENT" and self.tok.value == word

    def expect_op(self, op):
        if not self.at_op(op):
            self.error(f"expected {op!r}")
        return self.advance()

    def ident(self) -> str:
        if self.tok.kind != "IDENT":
            self.error("expected identifier")
        name = self.tok.value
        if name in _KEYWORDS:
            self.error(f"{name!r} is a keyword")
        self.advance()
        return name

    # --- statements ---

    def statements(self, terminators=("EOF",)) -> list:
        """Statements separated by ';;' (and ';' inside blocks)."""
        if self.tok.kind in terminators:
            return []
        out = [self.statement()]
        while self.at_op(";;"):
            self.advance()
            if self.tok.kind in terminators:
                break
            out.append(self.statement())
        return out

    def statement(self):
        if self.at_kw("let"):
            self.advance()
            name = self.ident()
            self.expect_op("=")
            return Let(name, self.expr())
        return self.expr()

    # --- expressions ---

    def expr(self):
        return self.or_expr()

    def or_expr(self):
        left = self.and_expr()
        while self.at_kw("or"):
            self.advance()
            left = Binary("or", left, self.and_expr())
        return left

    def and_expr(self):
        left = self.cmp_expr()
        while self.at_kw("and"):
            self.advance()
            left = Binary("and", left, self.cmp_expr())
        return left

    def cmp_expr(self):
        left = self.add_expr()
        while True:
            if self.tok.kind == "OP" and self.tok.value in _CMP_OPS:
                op = self.advance().value
                left = Binary(op, left, self.add_expr())
            elif self.at_kw("between"):
                self.advance()
                lo = self.add_expr()
                if not self.at_kw("and"):
                    self.error("expected 'and' in between")
                self.advance()
                left = Between(left, lo, self.add_expr())
            elif self.at_kw("in"):
                self.advance()
                left = InOp(left, self.add_expr())
            else:
                return left

    def add_expr(self):
        left = self.mul_expr()
        while self.at_op("+", "-"):
            op = self.advance().value
            left = Binary(op, left, self.mul_expr())
        return left

    def mul_expr(self):
        left = self.unary()
        while self.at_op("*", "/", "%"):
            op = self.advance().value
            left = Binary(op, left, self.unary())
        return left

    def unary(self):
        if self.at_op("-"):
            self.advance()
            operand = self.unary()
            if isinstance(operand, Literal) and isinstance(operand.value, (int, float)) \
                    and not isinstance(operand.value, bool):
                return Literal(-operand.value)
            return Unary("-", operand)
        if self.at_kw("not"):
            self.advance()
            return Unary("not", self.unary())
        return self.postfix()

    def postfix(self):
        node = self.primary()
        while True:
            if self.at_op("."):
                self.advance()
                tok = self.tok
                name = self.ident()
                if self.at_op("("):
                    args = self.call_args()
                    if name in STAGE_OPS:
                        stage = Stage(name, tuple(args), tok.line, tok.col)
                        if isinstance(node, Pipeline):
                            node = Pipeline(node.source, node.stages + (stage,))
                        else:
                            node = Pipeline(node, (stage,))
                    else:
                        node = Call(Member(node, name), tuple(args))
                else:
                    node = Member(node, name)
            elif self.at_op("("):
                node = Call(node, tuple(self.call_args()))
            elif self.at_op("["):
                self.advance()
                idx = self.expr()
                self.expect_op("]")
                node = Index(node, idx)
            else:
                return node

    def call_args(self) -> list:
        self.expect_op("(")
        args = []
        if not self.at_op(")"):
            while True:
                args.append(self.lambda_or_expr())
                if self.at_op(","):
                    self.advance()
                    continue
                break
        self.expect_op(")")
        return args

    def lambda_or_expr(self):
        if (
            self.tok.kind == "IDENT"
            and self.tok.value not in _KEYWORDS
            and self._peek(1).kind == "OP"
            and self._peek(1).value == "=>"
        ):
            param = self.ident()
            self.advance()  # =>
            return Lambda(param, tuple(self.lambda_body()))
        return self.expr()

    def lambda_body(self) -> list:
        if self.at_op("{") and not self._brace_is_dict():
            self.advance()
            stmts = [self.block_statement()]
            while self.at_op(";"):
                self.advance()
                if self.at_op("}"):
                    break
                stmts.append(self.block_statement())
            self.expect_op("}")
            return stmts
        # a bare body may itself be a lambda (curried form)
        return [self.lambda_or_expr()]

    def block_statement(self):
        if self.at_kw("let"):
            self.advance()
            name = self.ident()
            self.expect_op("=")
            return Let(name, self.expr())
        return self.expr()

    def _peek(self, offset: int) -> Token:
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else self.tokens[-1]

    def _brace_is_dict(self) -> bool:
        """At '{': dict literal iff `ident:` or `}` follows."""
        nxt = self._peek(1)
        if nxt.kind == "OP" and nxt.value == "}":
            return True
        after = self._peek(2)
        return (
            nxt.kind == "IDENT"
            and nxt.value not in _KEYWORDS
            and after.kind == "OP"
            and after.value == ":"
        )

    def primary(self):
        t = self.tok
        if t.kind in ("INT", "FLOAT", "STRING"):
            self.advance()
            return Literal(t.value)
        if t.kind == "IDENT":
            if t.value == "true":
                self.advance()
                return Literal(True)
            if t.value == "false":
                self.advance()
                return Literal(False)
            if t.value == "null":
                self.advance()
                return Literal(None)
            if t.value in _KEYWORDS:
                self.error(f"unexpected keyword {t.value!r}")
            self.advance()
            return Var(t.value)
        if self.at_op("("):
            self.advance()
            inner = self.lambda_or_expr_parenthesized()
            self.expect_op(")")
            return inner
        if self.at_op("["):
            self.advance()
            items = []
            if not self.at_op("]"):
                while True:
                    items.append(self.expr())
                    if self.at_op(","):
                        self.advance()
                        continue
                    break
            self.expect_op("]")
            return ArrayLit(tuple(items))
        if self.at_op("{"):
            if not self._brace_is_dict():
                self.error("expected 'name:' entries in dict literal")
            self.advance()
            entries = []
            if not self.at_op("}"):
                while True:
                    name = self.ident()
                    self.expect_op(":")
                    entries.append((name, self.expr()))
                    if self.at_op(","):
                        self.advance()
                        continue
                    break
            self.expect_op("}")
            return DictLit(tuple(entries))
        self.error("expected expression")

    def lambda_or_expr_parenthesized(self):
        return self.lambda_or_expr()


def parse_query(text: str) -> list:
    """Full statement list; trailing ';;' optional."""
    p = _Parser(tokenize(text))
    stmts = p.statements()
    if p.tok.kind != "EOF":
        p.error("unexpected trailing input")
    return stmts


def parse_expr(text: str):
    p = _Parser(tokenize(text))
    e = p.lambda_or_expr()
    if p.tok.kind != "EOF":
        p.error("unexpected trailing input")
    return e
