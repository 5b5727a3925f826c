"""Boolean control network model: named nodes, update/output rules, stepping.

A network has ``n`` state nodes, ``m`` input nodes (possibly none) and
``q`` output nodes.  Each state node carries one update expression over
state and input nodes; each output node carries one expression over state
nodes only.  States, inputs and outputs are fixed-width bit vectors encoded
as integers with declaration order giving the bit positions (node at index
``i`` occupies bit ``i``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .expr import BooleanExpr, Var, eval_expr, format_expr, semantic_support, variables

__all__ = [
    "BitVec",
    "Bcn",
    "ModelError",
    "NetworkGraph",
    "step",
    "observe",
    "derive_network_graph",
    "vacuous_edges",
    "transition_table",
    "output_table",
]


class ModelError(Exception):
    """Raised for structurally invalid networks or mismatched bit widths."""


@dataclass(frozen=True, order=True)
class BitVec:
    """Fixed-width bit vector; bit ``i`` holds the node at declaration index ``i``."""

    width: int
    value: int

    def __post_init__(self):
        if self.width < 0:
            raise ModelError(f"negative width {self.width}")
        if not 0 <= self.value < (1 << self.width):
            raise ModelError(f"value {self.value} out of range for width {self.width}")

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BitVec":
        bits = tuple(bits)
        value = 0
        for i, b in enumerate(bits):
            if b not in (0, 1):
                raise ModelError(f"bit {i} is {b!r}, expected 0 or 1")
            value |= b << i
        return cls(len(bits), value)

    @classmethod
    def from_string(cls, text: str) -> "BitVec":
        """Parse a declaration-order bit string such as ``"0110"``."""
        return cls.from_bits(int(c) for c in text)

    def bit(self, i: int) -> int:
        return (self.value >> i) & 1

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple((self.value >> i) & 1 for i in range(self.width))

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


def _check_unique(names: Iterable[str], what: str) -> None:
    seen = set()
    for name in names:
        if name in seen:
            raise ModelError(f"duplicate {what} {name!r}")
        seen.add(name)


@dataclass(frozen=True)
class Bcn:
    """A Boolean control network; immutable once constructed."""

    state_nodes: tuple[str, ...]
    input_nodes: tuple[str, ...]
    output_nodes: tuple[str, ...]
    updates: Mapping[str, BooleanExpr]
    outputs: Mapping[str, BooleanExpr]

    def __post_init__(self):
        if not self.state_nodes:
            raise ModelError("a network needs at least one state node")
        if not self.output_nodes:
            raise ModelError("a network needs at least one output node")
        _check_unique(
            list(self.state_nodes) + list(self.input_nodes) + list(self.output_nodes),
            "node name",
        )
        states = set(self.state_nodes)
        state_or_input = states | set(self.input_nodes)
        if set(self.updates) != states:
            raise ModelError("updates must cover exactly the state nodes")
        if set(self.outputs) != set(self.output_nodes):
            raise ModelError("outputs must cover exactly the output nodes")
        for name, expr in self.updates.items():
            bad = variables(expr) - state_or_input
            if bad:
                raise ModelError(
                    f"update of {name!r} references undeclared node(s) {sorted(bad)}"
                )
        for name, expr in self.outputs.items():
            bad = variables(expr) - states
            if bad:
                raise ModelError(
                    f"output {name!r} must depend on state nodes only, got {sorted(bad)}"
                )

    @property
    def n(self) -> int:
        return len(self.state_nodes)

    @property
    def m(self) -> int:
        return len(self.input_nodes)

    @property
    def q(self) -> int:
        return len(self.output_nodes)

    def state(self, value: int) -> BitVec:
        return BitVec(self.n, value)

    def input(self, value: int) -> BitVec:
        return BitVec(self.m, value)

    def state_from_string(self, text: str) -> BitVec:
        v = BitVec.from_string(text)
        if v.width != self.n:
            raise ModelError(f"state {text!r} has width {v.width}, expected {self.n}")
        return v


def _env_of(bcn: Bcn, x: BitVec, u: BitVec | None = None) -> dict[str, int]:
    env = {name: x.bit(i) for i, name in enumerate(bcn.state_nodes)}
    if u is not None:
        env.update((name, u.bit(j)) for j, name in enumerate(bcn.input_nodes))
    return env


def step(bcn: Bcn, x: BitVec, u: BitVec) -> BitVec:
    """One synchronous update of every state node."""
    if x.width != bcn.n:
        raise ModelError(f"state width {x.width} != n = {bcn.n}")
    if u.width != bcn.m:
        raise ModelError(f"input width {u.width} != m = {bcn.m}")
    env = _env_of(bcn, x, u)
    return BitVec.from_bits(eval_expr(bcn.updates[s], env) for s in bcn.state_nodes)


def observe(bcn: Bcn, x: BitVec) -> BitVec:
    """Evaluate all output nodes at state ``x``."""
    if x.width != bcn.n:
        raise ModelError(f"state width {x.width} != n = {bcn.n}")
    env = _env_of(bcn, x)
    return BitVec.from_bits(eval_expr(bcn.outputs[y], env) for y in bcn.output_nodes)


@dataclass(frozen=True)
class NetworkGraph:
    """Directed dependency graph over all nodes of a network.

    An edge (v, x) into a state node means v occurs in x's update rule; an
    edge (x, y) into an output node means x occurs in y's rule.  Input nodes
    have indegree 0 and output nodes outdegree 0 by construction.
    """

    state_nodes: tuple[str, ...]
    input_nodes: tuple[str, ...]
    output_nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]

    _succ: dict = field(init=False, repr=False, compare=False, hash=False, default=None)

    def __post_init__(self):
        succ: dict[str, list[str]] = {v: [] for v in self.nodes()}
        for tail, head in self.edges:
            succ[tail].append(head)
        object.__setattr__(self, "_succ", succ)

    def nodes(self) -> tuple[str, ...]:
        return self.state_nodes + self.input_nodes + self.output_nodes

    def successors(self, node: str) -> tuple[str, ...]:
        return tuple(self._succ[node])

    def parents(self, node: str) -> tuple[str, ...]:
        return tuple(t for t, h in self.edges if h == node)


def derive_network_graph(bcn: Bcn) -> NetworkGraph:
    """Dependency graph from syntactic rule support.

    The edge relation is syntactic on purpose: it reflects how the model
    was written, which is also what aggregations are drawn against.  Use
    :func:`vacuous_edges` to detect edges with no semantic effect.
    """
    edges: list[tuple[str, str]] = []
    order = {name: i for i, name in enumerate(bcn.input_nodes + bcn.state_nodes)}
    for target in bcn.state_nodes:
        tails = sorted(variables(bcn.updates[target]), key=order.__getitem__)
        edges.extend((tail, target) for tail in tails)
    state_order = {name: i for i, name in enumerate(bcn.state_nodes)}
    for target in bcn.output_nodes:
        tails = sorted(variables(bcn.outputs[target]), key=state_order.__getitem__)
        edges.extend((tail, target) for tail in tails)
    return NetworkGraph(
        bcn.state_nodes, bcn.input_nodes, bcn.output_nodes, tuple(edges)
    )


def vacuous_edges(bcn: Bcn) -> list[tuple[str, str]]:
    """Syntactic dependency edges whose tail has no semantic effect on the head.

    Lint only; the network graph itself always follows the written rules.
    """
    vacuous = []
    for target in bcn.state_nodes:
        expr = bcn.updates[target]
        dead = variables(expr) - semantic_support(expr)
        vacuous.extend((tail, target) for tail in sorted(dead))
    for target in bcn.output_nodes:
        expr = bcn.outputs[target]
        dead = variables(expr) - semantic_support(expr)
        vacuous.extend((tail, target) for tail in sorted(dead))
    return vacuous


def _eval_vectorized(expr: BooleanExpr, env: dict[str, np.ndarray], size: int) -> np.ndarray:
    out = eval_expr(expr, env)
    if np.isscalar(out):  # constant expression
        return np.full(size, out, dtype=np.uint8)
    return out


def transition_table(bcn: Bcn) -> np.ndarray:
    """Next-state codes, shape ``(2**m, 2**n)``; ``table[u, x]`` = successor of x under u."""
    n, m = bcn.n, bcn.m
    states = np.arange(1 << n, dtype=np.int64)
    state_env = {
        name: ((states >> i) & 1).astype(np.uint8)
        for i, name in enumerate(bcn.state_nodes)
    }
    table = np.zeros((1 << m, 1 << n), dtype=np.int64)
    for u in range(1 << m):
        env = dict(state_env)
        env.update(
            (name, np.uint8((u >> j) & 1)) for j, name in enumerate(bcn.input_nodes)
        )
        for i, s in enumerate(bcn.state_nodes):
            bits = _eval_vectorized(bcn.updates[s], env, 1 << n)
            table[u] |= bits.astype(np.int64) << i
    return table


def output_table(bcn: Bcn) -> np.ndarray:
    """Output codes per state, shape ``(2**n,)``."""
    n = bcn.n
    states = np.arange(1 << n, dtype=np.int64)
    env = {
        name: ((states >> i) & 1).astype(np.uint8)
        for i, name in enumerate(bcn.state_nodes)
    }
    out = np.zeros(1 << n, dtype=np.int64)
    for k, y in enumerate(bcn.output_nodes):
        bits = _eval_vectorized(bcn.outputs[y], env, 1 << n)
        out |= bits.astype(np.int64) << k
    return out


def describe(bcn: Bcn) -> str:
    """One-line summary used by the CLI."""
    return (
        f"{bcn.n} state node(s), {bcn.m} input node(s), {bcn.q} output node(s); "
        f"states={1 << bcn.n}, inputs={1 << bcn.m}"
    )


def rules_text(bcn: Bcn) -> list[str]:
    lines = [f"{s}' = {format_expr(bcn.updates[s])}" for s in bcn.state_nodes]
    lines += [f"{y} = {format_expr(bcn.outputs[y])}" for y in bcn.output_nodes]
    return lines


def identity_output_parent(bcn: Bcn, output: str) -> str | None:
    """State node x when ``output`` is defined as exactly ``x``, else None."""
    expr = bcn.outputs[output]
    if isinstance(expr, Var):
        return expr.name
    return None
