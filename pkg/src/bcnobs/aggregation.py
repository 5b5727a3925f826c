"""Node partitions, aggregation graphs, admissibility checks, sub-network extraction.

An aggregation partitions every node of a network (states, inputs, outputs)
into named blocks.  Crossing dependency edges condense the partition into
an aggregation graph over super nodes; acyclic aggregations admit a
reordering whose every prefix has zero indegree, which is what makes
per-block verdicts compose.  Each block induces a sub-network in which the
tails of entering edges are promoted to input nodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .bcn import Bcn, BitVec, NetworkGraph, derive_network_graph, step
from .expr import variables

__all__ = [
    "AggregationError",
    "CyclicAggregationError",
    "SubBcnError",
    "Aggregation",
    "AggregationGraph",
    "TopoOrder",
    "SubBcn",
    "Finding",
    "AssumptionReport",
    "CHECK_HAS_OUTPUT",
    "CHECK_OUTPUT_LOCALITY",
    "CHECK_PATH_TO_OUTPUT",
    "CHECK_EXTERNAL_INPUTS",
    "validate_assumption1",
    "build_aggregation_graph",
    "is_acyclic",
    "topological_order",
    "is_cascading",
    "extract_sub_bcn",
]


class AggregationError(Exception):
    """Structurally invalid partition."""


class CyclicAggregationError(Exception):
    """Raised when an acyclic-only operation meets a cyclic aggregation graph."""

    def __init__(self, cycle: list[str]):
        super().__init__("aggregation graph contains a cycle: " + " -> ".join(cycle + cycle[:1]))
        self.cycle = cycle


class SubBcnError(Exception):
    """Block cannot be turned into a well-formed sub-network."""


@dataclass(frozen=True)
class Aggregation:
    """A named partition of all network nodes into blocks (member order kept)."""

    bcn: Bcn
    names: tuple[str, ...]
    blocks: tuple[tuple[str, ...], ...]

    @classmethod
    def build(cls, bcn: Bcn, names: Iterable[str], blocks: Iterable[Iterable[str]]) -> "Aggregation":
        names = tuple(names)
        blocks = tuple(tuple(b) for b in blocks)
        if len(names) != len(blocks):
            raise AggregationError("one name per block required")
        all_nodes = set(bcn.state_nodes) | set(bcn.input_nodes) | set(bcn.output_nodes)
        seen: dict[str, str] = {}
        for name, members in zip(names, blocks):
            if not members:
                raise AggregationError(f"block {name!r} is empty")
            for node in members:
                if node not in all_nodes:
                    raise AggregationError(f"block {name!r} lists unknown node {node!r}")
                if node in seen:
                    raise AggregationError(
                        f"node {node!r} appears in blocks {seen[node]!r} and {name!r}"
                    )
                seen[node] = name
        uncovered = sorted(all_nodes - set(seen))
        if uncovered:
            raise AggregationError(f"node(s) not covered by any block: {uncovered}")
        if len(blocks) < 2:
            raise AggregationError(
                "a partition into a single block is not a proper aggregation"
            )
        return cls(bcn, names, blocks)

    @property
    def size(self) -> int:
        return len(self.blocks)

    def block_of(self, node: str) -> int:
        for i, members in enumerate(self.blocks):
            if node in members:
                return i
        raise KeyError(node)

    def _member_map(self) -> dict[str, int]:
        return {node: i for i, members in enumerate(self.blocks) for node in members}

    def block_states(self, i: int) -> tuple[str, ...]:
        members = set(self.blocks[i])
        return tuple(s for s in self.bcn.state_nodes if s in members)

    def block_inputs(self, i: int) -> tuple[str, ...]:
        members = set(self.blocks[i])
        return tuple(u for u in self.bcn.input_nodes if u in members)

    def block_outputs(self, i: int) -> tuple[str, ...]:
        members = set(self.blocks[i])
        return tuple(y for y in self.bcn.output_nodes if y in members)


@dataclass(frozen=True)
class AggregationGraph:
    """Condensation of the network graph along a partition."""

    names: tuple[str, ...]
    # (src block, dst block, crossing node edges), src != dst, list nonempty
    edges: tuple[tuple[int, int, tuple[tuple[str, str], ...]], ...]

    @property
    def size(self) -> int:
        return len(self.names)

    def successors(self, i: int) -> list[int]:
        return [dst for src, dst, _ in self.edges if src == i]

    def edge_pairs(self) -> list[tuple[int, int]]:
        return [(src, dst) for src, dst, _ in self.edges]


def build_aggregation_graph(agg: Aggregation) -> AggregationGraph:
    """Super-node graph whose edges are the block-crossing dependency edges."""
    graph = derive_network_graph(agg.bcn)
    where = agg._member_map()
    crossing: dict[tuple[int, int], list[tuple[str, str]]] = {}
    for tail, head in graph.edges:
        src, dst = where[tail], where[head]
        if src != dst:
            crossing.setdefault((src, dst), []).append((tail, head))
    edges = tuple(
        (src, dst, tuple(crossing[(src, dst)])) for src, dst in sorted(crossing)
    )
    return AggregationGraph(agg.names, edges)


def _find_cycle(ag: AggregationGraph) -> Optional[list[int]]:
    color = [0] * ag.size  # 0 unvisited, 1 on stack, 2 done
    succ = {i: ag.successors(i) for i in range(ag.size)}
    path: list[int] = []

    def dfs(v: int) -> Optional[list[int]]:
        color[v] = 1
        path.append(v)
        for w in succ[v]:
            if color[w] == 1:
                return path[path.index(w):]
            if color[w] == 0:
                found = dfs(w)
                if found:
                    return found
        color[v] = 2
        path.pop()
        return None

    for v in range(ag.size):
        if color[v] == 0:
            found = dfs(v)
            if found:
                return found
    return None


def is_acyclic(ag: AggregationGraph) -> bool:
    return _find_cycle(ag) is None


@dataclass(frozen=True)
class TopoOrder:
    """Block indices ordered so every prefix has zero indegree."""

    names: tuple[str, ...]
    order: tuple[int, ...]

    def ordered_names(self) -> tuple[str, ...]:
        return tuple(self.names[i] for i in self.order)

    def __str__(self) -> str:
        return " -> ".join(self.ordered_names())


def topological_order(ag: AggregationGraph) -> TopoOrder:
    """Repeated removal of a zero-indegree super node, smallest index first."""
    cycle = _find_cycle(ag)
    if cycle is not None:
        raise CyclicAggregationError([ag.names[i] for i in cycle])
    pairs = set(ag.edge_pairs())
    remaining = set(range(ag.size))
    order: list[int] = []
    while remaining:
        ready = sorted(
            v for v in remaining
            if not any(src in remaining and (src, v) in pairs for src in remaining)
        )
        pick = ready[0]
        order.append(pick)
        remaining.remove(pick)
    return TopoOrder(ag.names, tuple(order))


def prefix_indegrees_zero(agg: Aggregation, order: Iterable[int]) -> bool:
    """Check the defining property of a cascading order against the raw network graph."""
    graph = derive_network_graph(agg.bcn)
    where = agg._member_map()
    order = list(order)
    prefix: set[int] = set()
    for i in order:
        prefix.add(i)
        for tail, head in graph.edges:
            if where[head] in prefix and where[tail] not in prefix:
                return False
    return True


def is_cascading(agg: Aggregation) -> bool:
    """Search for a block reordering whose every prefix has zero indegree.

    Implemented directly against the network graph (greedy zero-indegree
    elimination plus a certification pass) rather than via the aggregation
    graph, so it cross-checks the acyclicity criterion.
    """
    graph = derive_network_graph(agg.bcn)
    where = agg._member_map()
    cross = {(where[t], where[h]) for t, h in graph.edges if where[t] != where[h]}
    remaining = set(range(agg.size))
    order: list[int] = []
    while remaining:
        ready = [
            v for v in sorted(remaining)
            if not any((src, v) in cross for src in remaining if src != v)
        ]
        if not ready:
            return False
        order.append(ready[0])
        remaining.remove(ready[0])
    return prefix_indegrees_zero(agg, order)


# ---------------------------------------------------------------------------
# Admissibility (per-block) checks
# ---------------------------------------------------------------------------

CHECK_HAS_OUTPUT = "has-output"
CHECK_OUTPUT_LOCALITY = "output-locality"
CHECK_PATH_TO_OUTPUT = "state-to-output-path"
CHECK_EXTERNAL_INPUTS = "external-inputs"


@dataclass(frozen=True)
class Finding:
    block: str
    check: str
    passed: bool
    detail: str = ""

    def machine_line(self) -> str:
        status = "pass" if self.passed else "fail"
        return f"block={self.block} check={self.check} status={status} detail={self.detail}"


@dataclass(frozen=True)
class AssumptionReport:
    findings: tuple[Finding, ...]

    def for_block(self, block: str) -> list[Finding]:
        return [f for f in self.findings if f.block == block]

    def failures(self, checks: Optional[Iterable[str]] = None) -> list[Finding]:
        wanted = set(checks) if checks is not None else None
        return [
            f for f in self.findings
            if not f.passed and (wanted is None or f.check in wanted)
        ]

    def passes(self, property: str) -> bool:
        """Admissibility gate for decomposed verification of ``property``.

        Observability requires every check including the state-to-output
        path condition.  For reconstructibility the path condition is
        informational only: a state node whose value washes out without
        ever touching an in-block output cannot prevent the current state
        from being pinned down, and enforcing the path condition would
        reject aggregations whose per-block reconstructibility verdicts
        are perfectly meaningful.
        """
        if property == "observability":
            return not self.failures()
        if property == "reconstructibility":
            return not self.failures({CHECK_HAS_OUTPUT, CHECK_OUTPUT_LOCALITY})
        raise ValueError(f"unknown property {property!r}")

    def to_text(self) -> str:
        lines = []
        for f in self.findings:
            status = "PASS" if f.passed else "FAIL"
            detail = f" ({f.detail})" if f.detail else ""
            lines.append(f"  [{status}] {f.block}: {f.check}{detail}")
        return "\n".join(lines)

    def to_machine(self) -> str:
        return "\n".join(f.machine_line() for f in self.findings)


def _induced_successors(graph: NetworkGraph, members: set[str]) -> dict[str, list[str]]:
    return {
        v: [w for w in graph.successors(v) if w in members]
        for v in members
    }


def validate_assumption1(agg: Aggregation) -> AssumptionReport:
    """Per-block admissibility findings; failures are reported, never raised.

    For every block: it must contain an output node; in-block outputs must
    depend on in-block state nodes only; every in-block state node must
    reach, inside the block, an output node all of whose state parents are
    in-block.  The promotion of entering-edge tails to sub-network inputs
    is constructive and reported informationally.
    """
    bcn = agg.bcn
    graph = derive_network_graph(bcn)
    findings: list[Finding] = []
    states = set(bcn.state_nodes)
    inputs = set(bcn.input_nodes)
    for i, name in enumerate(agg.names):
        members = set(agg.blocks[i])
        block_states = [s for s in bcn.state_nodes if s in members]
        block_outputs = [y for y in bcn.output_nodes if y in members]

        findings.append(Finding(
            name, CHECK_HAS_OUTPUT, bool(block_outputs),
            "" if block_outputs else "block contains no output node",
        ))

        nonlocal_outputs = {
            y: sorted(variables(bcn.outputs[y]) - members)
            for y in block_outputs
            if variables(bcn.outputs[y]) - members
        }
        findings.append(Finding(
            name, CHECK_OUTPUT_LOCALITY, not nonlocal_outputs,
            "; ".join(
                f"output {y} reads out-of-block state(s) {ext}"
                for y, ext in nonlocal_outputs.items()
            ),
        ))

        if block_states:
            usable = [
                y for y in block_outputs
                if y not in nonlocal_outputs
                and set(graph.parents(y)) & states <= members
            ]
            succ = _induced_successors(graph, members)
            reaching = set(usable)
            frontier = list(usable)
            predecessors: dict[str, list[str]] = {v: [] for v in members}
            for v, ws in succ.items():
                for w in ws:
                    predecessors[w].append(v)
            while frontier:
                w = frontier.pop()
                for v in predecessors[w]:
                    if v not in reaching:
                        reaching.add(v)
                        frontier.append(v)
            stranded = [x for x in block_states if x not in reaching]
            findings.append(Finding(
                name, CHECK_PATH_TO_OUTPUT, not stranded,
                "no in-block path to a fully in-block-fed output for: "
                + ", ".join(stranded) if stranded else "",
            ))
        else:
            findings.append(Finding(
                name, CHECK_PATH_TO_OUTPUT, True,
                "block has no state nodes; sub-network is vacuously "
                "observable and reconstructible",
            ))

        external = _external_tails(graph, members, bcn)
        findings.append(Finding(
            name, CHECK_EXTERNAL_INPUTS, True,
            ("external input node(s) of the sub-network: " + ", ".join(external))
            if external else "no entering edges",
        ))
    return AssumptionReport(tuple(findings))


def _external_tails(graph: NetworkGraph, members: set[str], bcn: Bcn) -> list[str]:
    tails = {t for t, h in graph.edges if h in members and t not in members}
    ordered = [u for u in bcn.input_nodes if u in tails]
    ordered += [s for s in bcn.state_nodes if s in tails]
    return ordered


@dataclass(frozen=True)
class SubBcn:
    """The network induced by one block, with entering tails promoted to inputs."""

    bcn: Bcn
    parent: Bcn
    block_index: int
    block_name: str
    in_block_inputs: tuple[str, ...]
    external_inputs: tuple[str, ...]

    def parent_input_assignment(self, x: BitVec, u: BitVec) -> BitVec:
        """Sub-network input vector read off a parent state/input pair."""
        parent = self.parent
        state_pos = {s: i for i, s in enumerate(parent.state_nodes)}
        input_pos = {s: i for i, s in enumerate(parent.input_nodes)}
        bits = []
        for name in self.bcn.input_nodes:
            if name in input_pos:
                bits.append(u.bit(input_pos[name]))
            else:
                bits.append(x.bit(state_pos[name]))
        return BitVec.from_bits(bits)

    def project_state(self, x: BitVec) -> BitVec:
        parent = self.parent
        state_pos = {s: i for i, s in enumerate(parent.state_nodes)}
        return BitVec.from_bits(x.bit(state_pos[s]) for s in self.bcn.state_nodes)


def extract_sub_bcn(agg: Aggregation, i: int) -> SubBcn:
    """Build the sub-network of block ``i``.

    Update and output expressions are taken verbatim from the parent;
    out-of-block state or input nodes occurring in them become input nodes
    of the sub-network.  Raises :class:`SubBcnError` for blocks without
    output nodes, with non-local outputs, or without state nodes (the
    latter are vacuous and need no extraction).
    """
    bcn = agg.bcn
    name = agg.names[i]
    members = set(agg.blocks[i])
    block_states = agg.block_states(i)
    block_outputs = agg.block_outputs(i)
    if not block_outputs:
        raise SubBcnError(f"block {name!r} has no output node")
    for y in block_outputs:
        external = variables(bcn.outputs[y]) - members
        if external:
            raise SubBcnError(
                f"block {name!r}: output {y!r} reads out-of-block state(s) {sorted(external)}"
            )
    if not block_states:
        raise SubBcnError(
            f"block {name!r} has no state nodes; it is vacuous and has no sub-network"
        )
    graph = derive_network_graph(bcn)
    external = tuple(_external_tails(graph, members, bcn))
    in_block = agg.block_inputs(i)
    sub_inputs = in_block + external
    sub = Bcn(
        state_nodes=block_states,
        input_nodes=sub_inputs,
        output_nodes=block_outputs,
        updates={s: bcn.updates[s] for s in block_states},
        outputs={y: bcn.outputs[y] for y in block_outputs},
    )
    return SubBcn(sub, bcn, i, name, in_block, external)


def sub_step_matches_parent(sub: SubBcn, x: BitVec, u: BitVec) -> bool:
    """Parent-step projection agrees with sub-network stepping (used by tests)."""
    parent_next = step(sub.parent, x, u)
    sub_next = step(sub.bcn, sub.project_state(x), sub.parent_input_assignment(x, u))
    return sub_next == sub.project_state(parent_next)
