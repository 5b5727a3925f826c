"""Text formats for network models (.bcn) and aggregations (.agg).

A .bcn file declares nodes and rules::

    # comments run to end of line
    inputs:  u            # may be empty or omitted
    states:  A B
    outputs: y
    observe: A            # optional: adds an identity output obs_A
    A' = B & u
    B' = !A | u
    y  = A

Expression operators, loosest binding first: ``<->`` (XNOR) and ``->``
(implication), then ``|``, ``^``, ``&`` and ``!&`` (NAND), and prefix ``!``.
All binary operators are left-associative; sugar desugars to the five core
constructors.  The full grammar ships in docs/grammar.ebnf.

A .agg file partitions every node (inputs, states, outputs) into named
blocks::

    block N1: x1 x2 x3 y1
    block N2: x4 x5 u1 y2
"""

from __future__ import annotations

import re

from .aggregation import Aggregation
from .bcn import Bcn
from .expr import And, BooleanExpr, Const, Not, Or, Var, Xor, format_expr, variables

__all__ = [
    "ParseError",
    "parse_bcn",
    "parse_aggregation",
    "serialize_bcn",
    "serialize_aggregation",
    "OBSERVATION_PREFIX",
]

OBSERVATION_PREFIX = "obs_"

_TOKEN_RE = re.compile(
    r"(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op><->|->|!&|[!&|^()01])"
)


class ParseError(Exception):
    """Syntax or consistency error with source location."""

    def __init__(self, message: str, line: int, column: int = 0):
        super().__init__(f"line {line}" + (f", col {column}" if column else "") + f": {message}")
        self.line = line
        self.column = column


def _tokenize(text: str, lineno: int) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos == len(text):
            return tokens
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ParseError(f"unexpected character {text[pos]!r}", lineno, pos + 1)
        kind = match.lastgroup
        tokens.append((kind, match.group(kind), pos + 1))
        pos = match.end()


class _ExprParser:
    """Recursive-descent parser for one expression token list."""

    def __init__(self, tokens, lineno):
        self.tokens = tokens
        self.lineno = lineno
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of expression", self.lineno)
        self.pos += 1
        return tok

    def parse(self) -> BooleanExpr:
        expr = self.equiv()
        tok = self.peek()
        if tok is not None:
            raise ParseError(f"unexpected {tok[1]!r}", self.lineno, tok[2])
        return expr

    def binary(self, ops, sub):
        expr = sub()
        while True:
            tok = self.peek()
            if tok is None or tok[0] != "op" or tok[1] not in ops:
                return expr
            self.take()
            rhs = sub()
            expr = ops[tok[1]](expr, rhs)

    def equiv(self):
        ops = {
            "<->": lambda a, b: Not(Xor(a, b)),
            "->": lambda a, b: Or(Not(a), b),
        }
        return self.binary(ops, self.disj)

    def disj(self):
        return self.binary({"|": Or}, self.xor)

    def xor(self):
        return self.binary({"^": Xor}, self.conj)

    def conj(self):
        ops = {"&": And, "!&": lambda a, b: Not(And(a, b))}
        return self.binary(ops, self.unary)

    def unary(self):
        tok = self.peek()
        if tok is not None and tok[0] == "op" and tok[1] == "!":
            self.take()
            return Not(self.unary())
        return self.atom()

    def atom(self):
        tok = self.take()
        kind, value, col = tok
        if kind == "name":
            return Var(value)
        if value in ("0", "1"):
            return Const(int(value))
        if value == "(":
            expr = self.equiv()
            closing = self.take()
            if closing[1] != ")":
                raise ParseError("expected ')'", self.lineno, closing[2])
            return expr
        raise ParseError(f"unexpected {value!r}", self.lineno, col)


def _parse_expression(text: str, lineno: int) -> BooleanExpr:
    tokens = _tokenize(text, lineno)
    if not tokens:
        raise ParseError("empty expression", lineno)
    return _ExprParser(tokens, lineno).parse()


_HEADERS = ("inputs", "states", "outputs", "observe")
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


def _split_names(rest: str, lineno: int) -> list[str]:
    names = rest.replace(",", " ").split()
    for name in names:
        if not _NAME_RE.match(name):
            raise ParseError(f"invalid node name {name!r}", lineno)
    return names


def parse_bcn(text: str) -> Bcn:
    """Parse .bcn source into a :class:`Bcn`.

    Every state node needs exactly one ``name' = expr`` line and every
    output node exactly one ``name = expr`` line.  An ``observe:`` header
    appends one identity output ``obs_x`` per listed state node.
    """
    declared: dict[str, list[str]] = {h: [] for h in _HEADERS}
    seen_headers: set[str] = set()
    rule_lines: list[tuple[int, str, bool, str]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, sep, rest = line.partition(":")
        if sep and head.strip() in _HEADERS:
            header = head.strip()
            if header in seen_headers:
                raise ParseError(f"duplicate {header!r} section", lineno)
            seen_headers.add(header)
            declared[header] = _split_names(rest, lineno)
            continue
        lhs, sep, rhs = line.partition("=")
        if not sep:
            raise ParseError("expected a declaration or a rule containing '='", lineno)
        lhs = lhs.strip()
        is_update = lhs.endswith("'")
        if is_update:
            lhs = lhs[:-1].strip()
        if not _NAME_RE.match(lhs):
            raise ParseError(f"invalid node name {lhs!r} on left-hand side", lineno)
        rule_lines.append((lineno, lhs, is_update, rhs.strip()))

    states = declared["states"]
    inputs = declared["inputs"]
    outputs = list(declared["outputs"])
    if not states:
        raise ParseError("no state nodes declared (states: section missing or empty)", 1)
    if not outputs and not declared["observe"]:
        raise ParseError("no output nodes declared (outputs: section missing or empty)", 1)

    updates: dict[str, BooleanExpr] = {}
    output_rules: dict[str, BooleanExpr] = {}
    state_set, output_set = set(states), set(outputs)
    for lineno, name, is_update, rhs in rule_lines:
        if is_update:
            if name not in state_set:
                raise ParseError(f"update rule for undeclared state node {name!r}", lineno)
            if name in updates:
                raise ParseError(f"duplicate update rule for {name!r}", lineno)
            updates[name] = _parse_expression(rhs, lineno)
        else:
            if name not in output_set:
                raise ParseError(f"output rule for undeclared output node {name!r}", lineno)
            if name in output_rules:
                raise ParseError(f"duplicate output rule for {name!r}", lineno)
            output_rules[name] = _parse_expression(rhs, lineno)

    missing = [s for s in states if s not in updates]
    if missing:
        raise ParseError(f"missing update rule for state node(s) {missing}", 1)
    missing = [y for y in outputs if y not in output_rules]
    if missing:
        raise ParseError(f"missing output rule for output node(s) {missing}", 1)

    taken = set(states) | set(inputs) | output_set
    for observed in declared["observe"]:
        if observed not in state_set:
            raise ParseError(f"observe: {observed!r} is not a state node", 1)
        obs_name = OBSERVATION_PREFIX + observed
        if obs_name in taken:
            raise ParseError(f"observe: generated name {obs_name!r} already in use", 1)
        taken.add(obs_name)
        outputs.append(obs_name)
        output_rules[obs_name] = Var(observed)

    declared_all = set(states) | set(inputs) | set(outputs)
    for lineno, name, is_update, rhs in rule_lines:
        expr = updates[name] if is_update else output_rules[name]
        unknown = variables(expr) - declared_all
        if unknown:
            raise ParseError(f"undeclared variable(s) {sorted(unknown)}", lineno)

    try:
        return Bcn(tuple(states), tuple(inputs), tuple(outputs), updates, output_rules)
    except Exception as exc:  # width/uniqueness violations surface with location 1
        raise ParseError(str(exc), 1) from exc


def serialize_bcn(bcn: Bcn) -> str:
    """Canonical .bcn text; re-parsing yields a structurally equal network."""
    lines = []
    if bcn.input_nodes:
        lines.append("inputs: " + " ".join(bcn.input_nodes))
    else:
        lines.append("inputs:")
    lines.append("states: " + " ".join(bcn.state_nodes))
    lines.append("outputs: " + " ".join(bcn.output_nodes))
    lines.append("")
    for s in bcn.state_nodes:
        lines.append(f"{s}' = {format_expr(bcn.updates[s])}")
    for y in bcn.output_nodes:
        lines.append(f"{y} = {format_expr(bcn.outputs[y])}")
    return "\n".join(lines) + "\n"


_BLOCK_RE = re.compile(r"block\s+(?P<name>[A-Za-z_][A-Za-z0-9_]*)\s*:\s*(?P<rest>.*)$")


def parse_aggregation(text: str, bcn: Bcn) -> Aggregation:
    """Parse .agg source against an already-parsed network.

    Blocks must be nonempty and pairwise disjoint and must jointly cover
    every state, input and output node.
    """
    names: list[str] = []
    blocks: list[tuple[str, ...]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        match = _BLOCK_RE.match(line)
        if not match:
            raise ParseError("expected 'block NAME: node node ...'", lineno)
        name = match.group("name")
        if name in names:
            raise ParseError(f"duplicate block name {name!r}", lineno)
        members = _split_names(match.group("rest"), lineno)
        if not members:
            raise ParseError(f"block {name!r} is empty", lineno)
        names.append(name)
        blocks.append(tuple(members))

    if not blocks:
        raise ParseError("no blocks declared", 1)
    try:
        return Aggregation.build(bcn, tuple(names), blocks)
    except Exception as exc:
        raise ParseError(str(exc), 1) from exc


def serialize_aggregation(agg: Aggregation) -> str:
    """Canonical .agg text; block and member order are preserved."""
    lines = []
    for name, members in zip(agg.names, agg.blocks):
        lines.append(f"block {name}: " + " ".join(members))
    return "\n".join(lines) + "\n"
