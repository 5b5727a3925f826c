"""Decomposed verification, cost model, and observation-set analysis.

Per-block verdicts compose one way only: for an admissible acyclic
aggregation, all sub-networks positive proves the whole network positive.
Nothing follows from a negative block (both converse directions fail on
small counterexamples), so decomposed verification answers PROVED or
INCONCLUSIVE and never claims a whole-network negative.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

from .aggregation import (
    Aggregation,
    AssumptionReport,
    SubBcnError,
    TopoOrder,
    _external_tails,
    build_aggregation_graph,
    extract_sub_bcn,
    is_acyclic,
    topological_order,
    validate_assumption1,
)
from .bcn import Bcn, ModelError, derive_network_graph, identity_output_parent
from .expr import Var
from .pairgraph import (
    CapExceededError,
    PairGraphStats,
    Verdict,
    construction_cost,
    is_observable,
    is_reconstructible,
)

__all__ = [
    "PROVED",
    "INCONCLUSIVE",
    "OBSERVABILITY",
    "RECONSTRUCTIBILITY",
    "normalize_property",
    "BlockResult",
    "DecomposedVerdict",
    "CostEstimate",
    "ObservationSetReport",
    "verify_direct",
    "verify_decomposed",
    "estimate_cost",
    "add_observations",
    "analyze_observation_sets",
    "default_workers",
]

PROVED = "PROVED"
INCONCLUSIVE = "INCONCLUSIVE"

OBSERVABILITY = "observability"
RECONSTRUCTIBILITY = "reconstructibility"

_WORKERS_ENV = "BCNOBS_WORKERS"

EXHAUSTIVE_POOL_LIMIT = 12


def normalize_property(name: str) -> str:
    key = name.strip().lower()
    if key in ("obs", "observability", "observable"):
        return OBSERVABILITY
    if key in ("recon", "reconstructibility", "reconstructible"):
        return RECONSTRUCTIBILITY
    raise ValueError(f"unknown property {name!r} (expected 'obs' or 'recon')")


def default_workers() -> int:
    raw = os.environ.get(_WORKERS_ENV, "").strip()
    if raw.isdigit() and int(raw) > 0:
        return int(raw)
    return 1


def _decider(property: str) -> Callable[..., Verdict]:
    return is_observable if property == OBSERVABILITY else is_reconstructible


def verify_direct(bcn: Bcn, property: str, cap: Optional[int] = None) -> Verdict:
    """Whole-network check through the pair-graph criterion."""
    return _decider(normalize_property(property))(bcn, cap=cap)


@dataclass(frozen=True)
class BlockResult:
    name: str
    status: str  # positive | negative | vacuous | unverified | not-extractable
    verdict: Optional[Verdict] = None
    note: str = ""

    @property
    def counts_positive(self) -> bool:
        return self.status in ("positive", "vacuous")


@dataclass(frozen=True)
class DecomposedVerdict:
    property: str
    overall: str  # PROVED | INCONCLUSIVE
    acyclic: bool
    admissible: bool
    assumption: AssumptionReport
    order: Optional[TopoOrder]
    blocks: tuple[BlockResult, ...]
    notes: tuple[str, ...]

    def block(self, name: str) -> BlockResult:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)


def verify_decomposed(
    bcn: Bcn,
    agg: Aggregation,
    property: str,
    cap: Optional[int] = None,
    workers: Optional[int] = None,
) -> DecomposedVerdict:
    """Compose per-block verdicts under the admissibility and acyclicity gates.

    PROVED requires the aggregation graph to be acyclic, the admissibility
    checks relevant to the property to pass, and every block to verify
    positive (stateless blocks count as vacuously positive).  Any failure
    yields INCONCLUSIVE: a negative block never disproves the whole
    network.
    """
    property = normalize_property(property)
    report = validate_assumption1(agg)
    ag = build_aggregation_graph(agg)
    acyclic = is_acyclic(ag)
    order = topological_order(ag) if acyclic else None
    admissible = report.passes(property)
    notes: list[str] = []
    if not acyclic:
        notes.append("aggregation graph contains a cycle; block verdicts do not compose")
    if not admissible:
        failed = ", ".join(
            f"{f.block}:{f.check}" for f in report.failures()
        )
        notes.append(f"admissibility checks failed ({failed})")

    decide = _decider(property)
    positive_word = "observable" if property == OBSERVABILITY else "reconstructible"

    def run_block(i: int) -> BlockResult:
        name = agg.names[i]
        if not agg.block_outputs(i):
            return BlockResult(name, "not-extractable", note="block has no output node")
        if not agg.block_states(i):
            return BlockResult(
                name, "vacuous",
                note="no state nodes; outputs carry no state information to recover",
            )
        try:
            sub = extract_sub_bcn(agg, i)
        except SubBcnError as exc:
            return BlockResult(name, "not-extractable", note=str(exc))
        try:
            verdict = decide(sub.bcn, cap=cap)
        except CapExceededError as exc:
            return BlockResult(name, "unverified", note=str(exc))
        status = "positive" if verdict.holds else "negative"
        return BlockResult(name, status, verdict=verdict)

    nworkers = workers if workers is not None else default_workers()
    indices = range(agg.size)
    if nworkers > 1:
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            blocks = tuple(pool.map(run_block, indices))
    else:
        blocks = tuple(run_block(i) for i in indices)

    for b in blocks:
        if b.status == "unverified":
            notes.append(f"block {b.name} exceeded the direct-verification cap")

    proved = acyclic and admissible and all(b.counts_positive for b in blocks)
    if not proved and acyclic and admissible:
        negatives = [b.name for b in blocks if b.status == "negative"]
        if negatives:
            notes.append(
                f"block(s) not {positive_word}: {', '.join(negatives)}; "
                "this does NOT disprove the whole network"
            )
    return DecomposedVerdict(
        property=property,
        overall=PROVED if proved else INCONCLUSIVE,
        acyclic=acyclic,
        admissible=admissible,
        assumption=report,
        order=order,
        blocks=blocks,
        notes=tuple(notes),
    )


@dataclass(frozen=True)
class CostEstimate:
    """Exact pair-graph construction costs, direct versus per-block sum."""

    block_count: int
    direct_cost: int
    aggregated_cost: int
    idealized_cost: float  # equal-block model k * 2^((2n+m)/k - 1)
    per_block: tuple[tuple[str, int, int, int], ...]  # (name, n_i, m_i, cost)
    aggregation_cheaper: bool


def estimate_cost(bcn: Bcn, agg: Aggregation) -> CostEstimate:
    """Compare 2^(2n+m-1) against the per-block sum of the same bound.

    Block input counts include promoted external tails.  Stateless blocks
    need no pair graph and cost nothing.  The idealized equal-block figure
    is reported for orientation only; the per-block sum is authoritative.
    """
    n, m = bcn.n, bcn.m
    direct = 1 << (2 * n + m - 1)
    graph = derive_network_graph(bcn)
    per_block = []
    total = 0
    for i, name in enumerate(agg.names):
        n_i = len(agg.block_states(i))
        members = set(agg.blocks[i])
        m_i = len(agg.block_inputs(i)) + len(_external_tails(graph, members, bcn))
        cost = (1 << (2 * n_i + m_i - 1)) if n_i else 0
        per_block.append((name, n_i, m_i, cost))
        total += cost
    k = agg.size
    idealized = k * 2.0 ** ((2 * n + m) / k - 1)
    return CostEstimate(
        block_count=k,
        direct_cost=direct,
        aggregated_cost=total,
        idealized_cost=idealized,
        per_block=tuple(per_block),
        aggregation_cheaper=total < direct,
    )


def add_observations(bcn: Bcn, nodes: list[str]) -> Bcn:
    """Attach one fresh identity output per listed state node.

    The new output obs_x has x as its only parent; existing outputs are
    kept.  Rejects unknown nodes and repeated listings.
    """
    from .parse import OBSERVATION_PREFIX

    seen: set[str] = set()
    taken = set(bcn.state_nodes) | set(bcn.input_nodes) | set(bcn.output_nodes)
    new_outputs = dict(bcn.outputs)
    names = list(bcn.output_nodes)
    for node in nodes:
        if node not in bcn.state_nodes:
            raise ModelError(f"cannot observe {node!r}: not a state node")
        if node in seen:
            raise ModelError(f"node {node!r} listed twice")
        seen.add(node)
        obs = OBSERVATION_PREFIX + node
        if obs in taken:
            raise ModelError(f"output name {obs!r} already in use")
        taken.add(obs)
        names.append(obs)
        new_outputs[obs] = Var(node)
    if not nodes:
        return bcn
    return Bcn(bcn.state_nodes, bcn.input_nodes, tuple(names), bcn.updates, new_outputs)


@dataclass(frozen=True)
class ObservationSetReport:
    block: str
    property: str
    mode: str  # leave-one-out | exhaustive
    pool: tuple[str, ...]
    necessary: tuple[str, ...]
    minimal_sets: tuple[tuple[str, ...], ...]
    unique_minimal: Optional[bool]
    minimality_verified: bool


def _strip_pool_observations(bcn: Bcn, agg: Aggregation, block_idx: int, pool: tuple[str, ...]):
    """Names of the block's identity observations of pool members, plus thinned blocks."""
    drop = {
        y for y in agg.block_outputs(block_idx)
        if identity_output_parent(bcn, y) in pool
    }
    kept = tuple(y for y in bcn.output_nodes if y not in drop)
    blocks = tuple(
        tuple(nm for nm in blk if nm not in drop) for blk in agg.blocks
    )
    return kept, blocks


def _observed_block_passes(
    bcn: Bcn,
    kept_outputs: tuple[str, ...],
    base_blocks: tuple[tuple[str, ...], ...],
    agg: Aggregation,
    block_idx: int,
    observed: tuple[str, ...],
    property: str,
    cap: Optional[int],
) -> bool:
    """Re-extract the block's sub-network under a candidate observation set."""
    from .parse import OBSERVATION_PREFIX

    out_names = kept_outputs + tuple(OBSERVATION_PREFIX + x for x in observed)
    if not out_names:
        return False
    outputs = {y: bcn.outputs[y] for y in kept_outputs}
    outputs.update((OBSERVATION_PREFIX + x, Var(x)) for x in observed)
    model = Bcn(bcn.state_nodes, bcn.input_nodes, out_names, bcn.updates, outputs)
    blocks = []
    for i, blk in enumerate(base_blocks):
        blk = list(blk)
        if i == block_idx:
            blk.extend(OBSERVATION_PREFIX + x for x in observed)
        blocks.append(tuple(blk))
    try:
        new_agg = Aggregation.build(model, agg.names, blocks)
        sub = extract_sub_bcn(new_agg, block_idx)
    except SubBcnError:
        return False
    verdict = _decider(property)(sub.bcn, cap=cap)
    return bool(verdict.holds)


def analyze_observation_sets(
    bcn: Bcn,
    agg: Aggregation,
    block: str,
    property: str,
    mode: str = "leave-one-out",
    cap: Optional[int] = None,
) -> ObservationSetReport:
    """Which state nodes of a block must be observed for its verdict to hold.

    Candidates are the block's state nodes.  Existing identity
    observations of candidates are stripped first, every candidate subset
    is applied through fresh identity outputs (joining the block of their
    parent), and the sub-network is re-extracted and checked.

    Leave-one-out marks a node necessary when observing all other
    candidates fails.  Exhaustive mode enumerates subsets in increasing
    size and reports every minimal passing set plus a uniqueness flag;
    minimality is re-verified by single-node removals.
    """
    property = normalize_property(property)
    if mode not in ("leave-one-out", "exhaustive"):
        raise ValueError(f"unknown mode {mode!r}")
    block_idx = list(agg.names).index(block)
    pool = agg.block_states(block_idx)
    kept_outputs, base_blocks = _strip_pool_observations(bcn, agg, block_idx, pool)

    cache: dict[tuple[str, ...], bool] = {}

    def passes(observed: tuple[str, ...]) -> bool:
        if observed not in cache:
            cache[observed] = _observed_block_passes(
                bcn, kept_outputs, base_blocks, agg, block_idx, observed, property, cap
            )
        return cache[observed]

    necessary = tuple(
        x for x in pool if not passes(tuple(s for s in pool if s != x))
    )

    minimal_sets: list[tuple[str, ...]] = []
    unique: Optional[bool] = None
    verified = False
    if mode == "exhaustive":
        if len(pool) > EXHAUSTIVE_POOL_LIMIT:
            raise ValueError(
                f"candidate pool of {len(pool)} exceeds the exhaustive-mode "
                f"limit of {EXHAUSTIVE_POOL_LIMIT}"
            )
        for size in range(len(pool) + 1):
            for combo in itertools.combinations(pool, size):
                chosen = set(combo)
                if any(set(ms) <= chosen for ms in minimal_sets):
                    continue  # strict superset of a known minimal set
                if passes(combo):
                    minimal_sets.append(combo)
        unique = len(minimal_sets) == 1
        verified = all(
            not passes(tuple(x for x in ms if x != dropped))
            for ms in minimal_sets
            for dropped in ms
        )
    return ObservationSetReport(
        block=block,
        property=property,
        mode=mode,
        pool=pool,
        necessary=necessary,
        minimal_sets=tuple(minimal_sets),
        unique_minimal=unique,
        minimality_verified=verified,
    )
