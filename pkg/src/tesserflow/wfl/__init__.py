"""Query language: lexer, parser, AST, evaluator, builtins, sketches."""

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
    Stage,
    STAGE_OPS,
    Unary,
    Var,
    print_ast,
)
from tesserflow.wfl.builtins import register_extension
from tesserflow.wfl.eval import EvalContext, broadcast_apply, eval_expr, eval_lambda
from tesserflow.wfl.parser import parse_expr, parse_query

__all__ = [
    "ArrayLit",
    "Between",
    "Binary",
    "Call",
    "DictLit",
    "Index",
    "InOp",
    "Lambda",
    "Let",
    "Literal",
    "Member",
    "Pipeline",
    "Stage",
    "STAGE_OPS",
    "Unary",
    "Var",
    "EvalContext",
    "broadcast_apply",
    "eval_expr",
    "eval_lambda",
    "parse_expr",
    "parse_query",
    "print_ast",
    "register_extension",
]
