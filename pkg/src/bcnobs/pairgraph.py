"""Weighted pair graphs and the observability/reconstructibility criteria.

The vertex set consists of unordered pairs of states with equal output,
with diagonal pairs {x, x} included for observability checks and excluded
for reconstructibility checks.  An edge between pairs carries the set of
inputs (the weight) driving both members of the source pair onto the
target pair.  A network is unobservable exactly when some non-diagonal
vertex reaches a cycle, and unreconstructible exactly when the
diagonal-free graph contains a cycle at all; both reduce to reachability
of cyclic strongly connected components.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from . import _kernels
from .bcn import Bcn, BitVec, ModelError, observe, output_table, step, transition_table

__all__ = [
    "OWPG",
    "RWPG",
    "DEFAULT_DIRECT_CAP",
    "MAX_INPUT_NODES",
    "CapExceededError",
    "PairGraph",
    "PairGraphStats",
    "LassoWitness",
    "Verdict",
    "Trace",
    "TraceStep",
    "build_pair_graph",
    "pair_graph_stats",
    "is_observable",
    "is_reconstructible",
    "quick_unobservable_check",
    "replay_witness",
    "dump_pair_graph",
    "construction_cost",
]

OWPG = "owpg"
RWPG = "rwpg"

DEFAULT_DIRECT_CAP = 14
MAX_INPUT_NODES = 20


class CapExceededError(Exception):
    """State count too large for explicit pair-graph construction."""


def construction_cost(n: int, m: int, kind: str = OWPG) -> int:
    """Worst-case weight evaluations for building the pair graph."""
    pairs = (1 << n) * ((1 << n) - 1) // 2
    if kind == OWPG:
        pairs += 1 << n
    return pairs * (1 << m)


def _check_cap(bcn: Bcn, cap: Optional[int], kind: str) -> None:
    limit = DEFAULT_DIRECT_CAP if cap is None else cap
    if bcn.m > MAX_INPUT_NODES:
        raise CapExceededError(
            f"{bcn.m} input nodes exceed the supported maximum of {MAX_INPUT_NODES}"
        )
    if bcn.n > limit:
        raise CapExceededError(
            f"{bcn.n} state nodes exceed the direct-verification cap of {limit}; "
            f"building this pair graph would take about {construction_cost(bcn.n, bcn.m, kind):_} "
            f"weight evaluations (2^(2n+m-1) scale). Raise --cap or verify via an aggregation."
        )


@dataclass(frozen=True)
class PairGraphStats:
    diagonal: int
    non_diagonal: int
    edges: int


@dataclass(frozen=True)
class LassoWitness:
    """A pair of initial states plus an input lasso exhibiting a violation.

    Replaying ``prefix`` and then repeating ``cycle`` keeps the two output
    sequences equal forever.  For reconstructibility witnesses the two
    state trajectories additionally stay distinct along the cycle.
    """

    state_width: int
    input_width: int
    start: tuple[int, int]
    prefix: tuple[int, ...]
    cycle: tuple[int, ...]

    def __post_init__(self):
        if not self.cycle:
            raise ValueError("witness cycle must be nonempty")

    def start_pair(self) -> tuple[BitVec, BitVec]:
        return BitVec(self.state_width, self.start[0]), BitVec(self.state_width, self.start[1])

    def _fmt_input(self, u: int) -> str:
        return str(BitVec(self.input_width, u)) if self.input_width else "-"

    def format_inputs(self) -> str:
        prefix = ",".join(self._fmt_input(u) for u in self.prefix)
        cycle = ",".join(self._fmt_input(u) for u in self.cycle)
        return f"{prefix} | {cycle}" if prefix else f"| {cycle}"

    def __str__(self) -> str:
        a, b = self.start_pair()
        return f"start {{{a},{b}}} inputs {self.format_inputs()}"


@dataclass(frozen=True)
class Verdict:
    property: str  # "observability" | "reconstructibility"
    holds: Optional[bool]  # None when the check could not be carried out
    witness: Optional[LassoWitness] = None
    stats: Optional[PairGraphStats] = None
    note: str = ""

    def __str__(self) -> str:
        if self.holds is None:
            return f"{self.property}: unknown ({self.note})"
        word = {
            ("observability", True): "observable",
            ("observability", False): "NOT observable",
            ("reconstructibility", True): "reconstructible",
            ("reconstructibility", False): "NOT reconstructible",
        }[(self.property, self.holds)]
        tail = f"; witness {self.witness}" if self.witness else ""
        return f"{word}{tail}"


class PairGraph:
    """Explicit pair graph with dense vertex indexing and merged edge weights."""

    def __init__(self, bcn: Bcn, kind: str, lo, hi, keys, edge_src, edge_dst, edge_weights):
        self.bcn = bcn
        self.kind = kind
        self.lo = lo
        self.hi = hi
        self.keys = keys  # lo * 2**n + hi, ascending
        self.edge_src = edge_src
        self.edge_dst = edge_dst
        self.edge_weights = edge_weights  # bitmask over input codes per edge
        self._indptr = None

    @property
    def n_vertices(self) -> int:
        return int(self.lo.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.edge_src.shape[0])

    def is_diagonal(self, v: int) -> bool:
        return bool(self.lo[v] == self.hi[v])

    @property
    def diagonal_mask(self) -> np.ndarray:
        return self.lo == self.hi

    def vertex_pair(self, v: int) -> tuple[BitVec, BitVec]:
        n = self.bcn.n
        return BitVec(n, int(self.lo[v])), BitVec(n, int(self.hi[v]))

    def vertex_label(self, v: int) -> str:
        a, b = self.vertex_pair(v)
        return f"{{{a},{b}}}"

    def vertex_index(self, a: int, b: int) -> Optional[int]:
        """Index of the unordered pair {a, b}, or None if not a vertex."""
        lo, hi = (a, b) if a <= b else (b, a)
        key = lo * (1 << self.bcn.n) + hi
        pos = int(np.searchsorted(self.keys, key))
        if pos < self.keys.shape[0] and self.keys[pos] == key:
            return pos
        return None

    def weight_mask(self, e: int) -> int:
        return int(self.edge_weights[e])

    def weight_inputs(self, e: int) -> tuple[int, ...]:
        """Input codes of edge ``e``, ascending."""
        mask = self.weight_mask(e)
        return tuple(u for u in range(1 << self.bcn.m) if (mask >> u) & 1)

    def _build_indptr(self) -> np.ndarray:
        if self._indptr is None:
            counts = np.bincount(self.edge_src, minlength=self.n_vertices)
            self._indptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
        return self._indptr

    def out_edges(self, v: int) -> Iterator[int]:
        indptr = self._build_indptr()
        return iter(range(int(indptr[v]), int(indptr[v + 1])))

    def scc(self) -> tuple[np.ndarray, int]:
        indptr = self._build_indptr()
        return _kernels.tarjan_scc(indptr, self.edge_dst, self.n_vertices)

    def cyclic_components(self, comp: np.ndarray, ncomp: int) -> np.ndarray:
        """Boolean mask over components: size >= 2 or carrying a self-loop."""
        cyclic = np.zeros(ncomp, dtype=bool)
        if ncomp:
            sizes = np.bincount(comp, minlength=ncomp)
            cyclic |= sizes >= 2
            self_loops = self.edge_src == self.edge_dst
            cyclic[comp[self.edge_src[self_loops]]] = True
        return cyclic

    def stats(self) -> PairGraphStats:
        diag = int(np.count_nonzero(self.diagonal_mask))
        return PairGraphStats(diag, self.n_vertices - diag, self.n_edges)


def build_pair_graph(bcn: Bcn, kind: str, cap: Optional[int] = None) -> PairGraph:
    """Construct the full pair graph of the given kind.

    Vertices are all equal-output pairs (membership is extensional, not
    limited to reachable pairs), indexed in canonical (lo, hi) order.  An
    edge exists for input u exactly when stepping both members under u
    lands on a pair that is itself a vertex; weights collect all such
    inputs per (src, dst).
    """
    if kind not in (OWPG, RWPG):
        raise ValueError(f"kind must be {OWPG!r} or {RWPG!r}, got {kind!r}")
    _check_cap(bcn, cap, kind)
    out = output_table(bcn)
    trans = transition_table(bcn)
    lo, hi = _kernels.member_pairs(out, include_diagonal=(kind == OWPG))
    keys = lo * (1 << bcn.n) + hi
    src, dst, inp = _kernels.successor_edges(
        lo, hi, keys, trans, out, exclude_diagonal=(kind == RWPG)
    )
    # Merge per-input parallel edges into weight masks; triples arrive
    # sorted by (src, dst, input), so groups are contiguous.
    if src.shape[0] == 0:
        edge_src = np.zeros(0, dtype=np.int64)
        edge_dst = np.zeros(0, dtype=np.int64)
        weights = np.zeros(0, dtype=np.uint64)
    else:
        pair_key = src * lo.shape[0] + dst
        boundaries = np.flatnonzero(np.r_[True, pair_key[1:] != pair_key[:-1]])
        edge_src = src[boundaries]
        edge_dst = dst[boundaries]
        if bcn.m <= 6:  # all 2**m weight bits fit one machine word
            bits = np.left_shift(np.uint64(1), inp.astype(np.uint64))
            weights = np.bitwise_or.reduceat(bits, boundaries)
        else:
            weights = []
            ends = np.r_[boundaries[1:], src.shape[0]]
            for b, e in zip(boundaries, ends):
                mask = 0
                for u in inp[b:e]:
                    mask |= 1 << int(u)
                weights.append(mask)
    return PairGraph(bcn, kind, lo, hi, keys, edge_src, edge_dst, weights)


def pair_graph_stats(graph: PairGraph) -> PairGraphStats:
    return graph.stats()


def _smallest_input(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


def _bfs_path(graph: PairGraph, start: int, targets: np.ndarray) -> tuple[int, list[int]]:
    """Shortest path from start to any target vertex; returns (end, inputs).

    Neighbors are visited in canonical edge order, and each traversed edge
    contributes its smallest input, so the result is deterministic.
    """
    if targets[start]:
        return start, []
    indptr = graph._build_indptr()
    parent_edge = {start: None}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for e in range(int(indptr[v]), int(indptr[v + 1])):
            w = int(graph.edge_dst[e])
            if w in parent_edge:
                continue
            parent_edge[w] = e
            if targets[w]:
                inputs = []
                node = w
                while parent_edge[node] is not None:
                    edge = parent_edge[node]
                    inputs.append(_smallest_input(graph.weight_mask(edge)))
                    node = int(graph.edge_src[edge])
                inputs.reverse()
                return w, inputs
            queue.append(w)
    raise RuntimeError("no target reachable; caller guaranteed otherwise")


def _shortest_cycle(graph: PairGraph, vertex: int, comp: np.ndarray) -> list[int]:
    """Shortest closed input walk from vertex back to itself inside its SCC."""
    indptr = graph._build_indptr()
    own = comp[vertex]
    # self-loop wins over any longer cycle
    for e in range(int(indptr[vertex]), int(indptr[vertex + 1])):
        if int(graph.edge_dst[e]) == vertex:
            return [_smallest_input(graph.weight_mask(e))]
    parent_edge: dict[int, int] = {}
    queue = deque()
    for e in range(int(indptr[vertex]), int(indptr[vertex + 1])):
        w = int(graph.edge_dst[e])
        if comp[w] == own and w not in parent_edge:
            parent_edge[w] = e
            queue.append(w)
    while queue:
        v = queue.popleft()
        if v == vertex:
            break
        for e in range(int(indptr[v]), int(indptr[v + 1])):
            w = int(graph.edge_dst[e])
            if comp[w] != own or w in parent_edge:
                continue
            parent_edge[w] = e
            queue.append(w)
    inputs = []
    node = vertex
    while True:
        edge = parent_edge[node]
        inputs.append(_smallest_input(graph.weight_mask(edge)))
        node = int(graph.edge_src[edge])
        if node == vertex:
            break
    inputs.reverse()
    return inputs


def _witness(graph: PairGraph, start: int, targets: np.ndarray, comp: np.ndarray) -> LassoWitness:
    entry, prefix = _bfs_path(graph, start, targets)
    cycle = _shortest_cycle(graph, entry, comp)
    return LassoWitness(
        state_width=graph.bcn.n,
        input_width=graph.bcn.m,
        start=(int(graph.lo[start]), int(graph.hi[start])),
        prefix=tuple(prefix),
        cycle=tuple(cycle),
    )


def is_observable(bcn: Bcn, cap: Optional[int] = None) -> Verdict:
    """Decide observability: no non-diagonal vertex may reach any cycle."""
    graph = build_pair_graph(bcn, OWPG, cap=cap)
    comp, ncomp = graph.scc()
    cyclic = graph.cyclic_components(comp, ncomp)
    cross = comp[graph.edge_src] != comp[graph.edge_dst]
    reach = _kernels.propagate_reachability(
        comp[graph.edge_src[cross]], comp[graph.edge_dst[cross]], cyclic
    )
    bad = ~graph.diagonal_mask & reach[comp]
    if not bad.any():
        return Verdict("observability", True, stats=graph.stats())
    start = int(np.flatnonzero(bad)[0])
    witness = _witness(graph, start, cyclic[comp], comp)
    return Verdict("observability", False, witness=witness, stats=graph.stats())


def is_reconstructible(bcn: Bcn, cap: Optional[int] = None) -> Verdict:
    """Decide reconstructibility: the diagonal-free pair graph must be acyclic."""
    graph = build_pair_graph(bcn, RWPG, cap=cap)
    comp, ncomp = graph.scc()
    cyclic = graph.cyclic_components(comp, ncomp)
    if not cyclic.any():
        return Verdict("reconstructibility", True, stats=graph.stats())
    in_cycle = cyclic[comp]
    start = int(np.flatnonzero(in_cycle)[0])
    witness = _witness(graph, start, in_cycle, comp)
    return Verdict("reconstructibility", False, witness=witness, stats=graph.stats())


def quick_unobservable_check(bcn: Bcn, cap: Optional[int] = None) -> Optional[LassoWitness]:
    """Sufficient unobservability test: a non-diagonal vertex reaching a diagonal one.

    Returns a witness when such a path exists.  Returning None is
    inconclusive: a cycle among non-diagonal vertices may still make the
    network unobservable.
    """
    graph = build_pair_graph(bcn, OWPG, cap=cap)
    diagonal = graph.diagonal_mask
    # reverse reachability from the diagonal set
    reaches_diag = diagonal.copy()
    pending = True
    while pending:
        pending = False
        hits = reaches_diag[graph.edge_dst] & ~reaches_diag[graph.edge_src]
        if hits.any():
            reaches_diag[graph.edge_src[hits]] = True
            pending = True
    candidates = ~diagonal & reaches_diag
    if not candidates.any():
        return None
    start = int(np.flatnonzero(candidates)[0])
    entry, prefix = _bfs_path(graph, start, diagonal)
    # Walk the diagonal subgraph under the all-zero input until a state
    # repeats; deterministic dynamics make this a rho-shaped run.
    n = bcn.n
    u0 = 0
    trans = transition_table(bcn)
    seen: dict[int, int] = {}
    walk: list[int] = []
    state = int(graph.lo[entry])
    while state not in seen:
        seen[state] = len(walk)
        walk.append(state)
        state = int(trans[u0][state])
    cycle_len = len(walk) - seen[state]
    prefix = list(prefix) + [u0] * seen[state]
    cycle = [u0] * cycle_len
    return LassoWitness(
        state_width=n,
        input_width=bcn.m,
        start=(int(graph.lo[start]), int(graph.hi[start])),
        prefix=tuple(prefix),
        cycle=tuple(cycle),
    )


@dataclass(frozen=True)
class TraceStep:
    time: int
    state_a: BitVec
    state_b: BitVec
    out_a: BitVec
    out_b: BitVec

    @property
    def outputs_equal(self) -> bool:
        return self.out_a == self.out_b

    @property
    def states_equal(self) -> bool:
        return self.state_a == self.state_b


@dataclass(frozen=True)
class Trace:
    steps: tuple[TraceStep, ...]
    first_output_divergence: Optional[int]

    @property
    def diverged(self) -> bool:
        return self.first_output_divergence is not None

    def states_distinct_throughout(self) -> bool:
        return all(not s.states_equal for s in self.steps)


def replay_witness(bcn: Bcn, witness: LassoWitness, rounds: int = 3) -> Trace:
    """Simulate both trajectories through prefix plus ``rounds`` cycle repetitions.

    Reports the first time step (if any) at which the two output vectors
    differ; a valid unobservability witness never diverges.
    """
    if witness.state_width != bcn.n or witness.input_width != bcn.m:
        raise ModelError(
            f"witness widths (n={witness.state_width}, m={witness.input_width}) "
            f"do not match the network (n={bcn.n}, m={bcn.m})"
        )
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    inputs = list(witness.prefix) + list(witness.cycle) * rounds
    a = BitVec(bcn.n, witness.start[0])
    b = BitVec(bcn.n, witness.start[1])
    steps = []
    divergence = None
    for t, u in enumerate([None] + inputs):
        if u is not None:
            a = step(bcn, a, BitVec(bcn.m, u))
            b = step(bcn, b, BitVec(bcn.m, u))
        entry = TraceStep(t, a, b, observe(bcn, a), observe(bcn, b))
        steps.append(entry)
        if divergence is None and not entry.outputs_equal:
            divergence = t
    return Trace(tuple(steps), divergence)


def dump_pair_graph(graph: PairGraph, out) -> None:
    """Write the graph in a line-oriented textual format for external tools."""
    out.write(f"# {graph.kind} vertices={graph.n_vertices} edges={graph.n_edges}\n")
    for v in range(graph.n_vertices):
        a, b = graph.vertex_pair(v)
        diag = " [diag]" if graph.is_diagonal(v) else ""
        out.write(f"{v}: {a},{b}{diag}\n")
    for e in range(graph.n_edges):
        labels = ",".join(
            str(BitVec(graph.bcn.m, u)) if graph.bcn.m else "-"
            for u in graph.weight_inputs(e)
        )
        out.write(f"{int(graph.edge_src[e])} -> {int(graph.edge_dst[e])} : {{{labels}}}\n")
