"""Tokenizer for query text.

Keywords are ordinary identifiers given meaning by the parser, so
field names like `in` are impossible but error messages stay simple.
"""

from __future__ import annotations

from dataclasses import dataclass

from tesserflow.errors import SyntaxError_

_MULTI_OPS = (";;", "=>", "==", "!=", "<=", ">=")
_SINGLE_OPS = "+-*/%<>=.,()[]{}:;"
_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_DIGITS = set("0123456789")  # ascii only; unicode isdigit() chars are not numbers here
_IDENT_CONT = _IDENT_START | _DIGITS

_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t", "r": "\r", "0": "\0"}


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, INT, FLOAT, STRING, OP, EOF
    value: object
    line: int
    col: int

    def __repr__(self):
        return f"{self.kind}({self.value!r})"


def tokenize(text: str) -> list:
    tokens = []
    pos = 0
    line = 1
    line_start = 0
    n = len(text)

    def err(message, at):
        raise SyntaxError_(message, line, at - line_start + 1)

    while pos < n:
        c = text[pos]
        if c == "\n":
            line += 1
            pos += 1
            line_start = pos
            continue
        if c in " \t\r":
            pos += 1
            continue
        if c == "#":
            while pos < n and text[pos] != "\n":
                pos += 1
            continue
        col = pos - line_start + 1
        if c in _IDENT_START:
            start = pos
            while pos < n and text[pos] in _IDENT_CONT:
                pos += 1
            tokens.append(Token("IDENT", text[start:pos], line, col))
            continue
        if c in _DIGITS:
            start = pos
            while pos < n and text[pos] in _DIGITS:
                pos += 1
            is_float = False
            if pos < n and text[pos] == "." and pos + 1 < n and text[pos + 1] in _DIGITS:
                is_float = True
                pos += 1
                while pos < n and text[pos] in _DIGITS:
                    pos += 1
            if pos < n and text[pos] in "eE":
                mark = pos
                pos += 1
                if pos < n and text[pos] in "+-":
                    pos += 1
                if pos < n and text[pos] in _DIGITS:
                    is_float = True
                    while pos < n and text[pos] in _DIGITS:
                        pos += 1
                else:
                    pos = mark
            lit = text[start:pos]
            if is_float:
                tokens.append(Token("FLOAT", float(lit), line, col))
            else:
                tokens.append(Token("INT", int(lit), line, col))
            continue
        if c == '"':
            start = pos
            pos += 1
            out = []
            while True:
                if pos >= n:
                    err("unterminated string", start)
                ch = text[pos]
                if ch == '"':
                    pos += 1
                    break
                if ch == "\n":
                    err("unterminated string", start)
                if ch == "\\":
                    pos += 1
                    if pos >= n:
                        err("unterminated string", start)
                    esc = text[pos]
                    if esc in _ESCAPES:
                        out.append(_ESCAPES[esc])
                        pos += 1
                    elif esc == "u":
                        hexs = text[pos + 1 : pos + 5]
                        if len(hexs) < 4 or any(h not in "0123456789abcdefABCDEF" for h in hexs):
                            err("bad unicode escape", pos)
                        out.append(chr(int(hexs, 16)))
                        pos += 5
                    else:
                        err(f"unknown escape \\{esc}", pos)
                else:
                    out.append(ch)
                    pos += 1
            tokens.append(Token("STRING", "".join(out), line, col))
            continue
        two = text[pos : pos + 2]
        if two in _MULTI_OPS:
            tokens.append(Token("OP", two, line, col))
            pos += 2
            continue
        if c in _SINGLE_OPS:
            tokens.append(Token("OP", c, line, col))
            pos += 1
            continue
        err(f"unexpected character {c!r}", pos)
    tokens.append(Token("EOF", None, line, n - line_start + 1))
    return tokens
