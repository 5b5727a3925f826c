"""Boolean expression trees over named variables.

Expressions are built from five core constructors: constants, variables,
negation, conjunction (multiplication mod 2), disjunction, and exclusive or
(addition mod 2).  Surface syntax sugar such as XNOR or implication is
desugared by the parser; this module never sees it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Mapping, Union

__all__ = [
    "BooleanExpr",
    "Const",
    "Var",
    "Not",
    "And",
    "Or",
    "Xor",
    "EvalError",
    "eval_expr",
    "variables",
    "semantic_support",
    "format_expr",
]

SEMANTIC_SUPPORT_MAX_VARS = 24


class EvalError(Exception):
    """Raised when an expression references a variable absent from the environment."""


@dataclass(frozen=True)
class Const:
    value: int

    def __post_init__(self):
        if self.value not in (0, 1):
            raise ValueError(f"constant must be 0 or 1, got {self.value!r}")


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Not:
    arg: "BooleanExpr"


@dataclass(frozen=True)
class And:
    left: "BooleanExpr"
    right: "BooleanExpr"


@dataclass(frozen=True)
class Or:
    left: "BooleanExpr"
    right: "BooleanExpr"


@dataclass(frozen=True)
class Xor:
    left: "BooleanExpr"
    right: "BooleanExpr"


BooleanExpr = Union[Const, Var, Not, And, Or, Xor]


def eval_expr(expr: BooleanExpr, env: Mapping[str, int]):
    """Evaluate ``expr`` under ``env``.

    The environment may bind plain ints (0/1) or numpy arrays of bits; the
    same logic serves both scalar stepping and vectorized truth-table
    construction.  Raises :class:`EvalError` naming the first unbound
    variable encountered.
    """
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        try:
            return env[expr.name]
        except KeyError:
            raise EvalError(f"unbound variable {expr.name!r}") from None
    if isinstance(expr, Not):
        return 1 ^ eval_expr(expr.arg, env)
    if isinstance(expr, And):
        return eval_expr(expr.left, env) & eval_expr(expr.right, env)
    if isinstance(expr, Or):
        return eval_expr(expr.left, env) | eval_expr(expr.right, env)
    if isinstance(expr, Xor):
        return eval_expr(expr.left, env) ^ eval_expr(expr.right, env)
    raise TypeError(f"not a BooleanExpr: {expr!r}")


def _walk(expr: BooleanExpr) -> Iterator[BooleanExpr]:
    stack = [expr]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Not):
            stack.append(node.arg)
        elif isinstance(node, (And, Or, Xor)):
            stack.append(node.left)
            stack.append(node.right)


def variables(expr: BooleanExpr) -> frozenset[str]:
    """Syntactic support: the set of variable names occurring in ``expr``."""
    return frozenset(n.name for n in _walk(expr) if isinstance(n, Var))


def semantic_support(expr: BooleanExpr) -> frozenset[str]:
    """Variables whose value can change the value of ``expr``.

    Determined by exhaustive evaluation over all assignments to the
    occurring variables, so a variable that appears only vacuously (e.g. in
    ``A & !A``) is excluded.  Refuses expressions with more than
    ``SEMANTIC_SUPPORT_MAX_VARS`` distinct variables.
    """
    names = sorted(variables(expr))
    if len(names) > SEMANTIC_SUPPORT_MAX_VARS:
        raise ValueError(
            f"semantic_support limited to {SEMANTIC_SUPPORT_MAX_VARS} variables, "
            f"expression has {len(names)}"
        )
    essential: set[str] = set()
    for bits in itertools.product((0, 1), repeat=len(names)):
        env = dict(zip(names, bits))
        base = eval_expr(expr, env)
        for name in names:
            if name in essential:
                continue
            env[name] ^= 1
            if eval_expr(expr, env) != base:
                essential.add(name)
            env[name] ^= 1
    return frozenset(essential)


# Rendering precedence, loosest first; needed to emit minimal parentheses.
_LEVEL = {Or: 1, Xor: 2, And: 3, Not: 4, Var: 5, Const: 5}

_OP_TOKEN = {And: "&", Or: "|", Xor: "^"}


def format_expr(expr: BooleanExpr) -> str:
    """Render ``expr`` in the surface syntax accepted by the parser."""

    def render(e: BooleanExpr, parent_level: int) -> str:
        level = _LEVEL[type(e)]
        if isinstance(e, Const):
            return str(e.value)
        if isinstance(e, Var):
            return e.name
        if isinstance(e, Not):
            return "!" + render(e.arg, level)
        text = f"{render(e.left, level)} {_OP_TOKEN[type(e)]} {render(e.right, level + 1)}"
        # Right operand is rendered one level tighter: binary operators are
        # left-associative, so an equal-level right child needs parentheses.
        if level < parent_level:
            return f"({text})"
        return text

    return render(expr, 0)
