"""Bounded brute-force deciders used to cross-validate the pair-graph criteria.

These work straight from the definitions via depth-first search over input
sequences, simulating both trajectories with scalar stepping.  They share
no code with the pair-graph construction beyond ``step``/``observe``;
independence is the point.  Hard size limits keep the search tractable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .bcn import Bcn, BitVec, observe, step

__all__ = [
    "ORACLE_MAX_STATE_NODES",
    "ORACLE_MAX_INPUT_NODES",
    "OracleLimitError",
    "OracleVerdict",
    "oracle_observable",
    "oracle_reconstructible",
]

ORACLE_MAX_STATE_NODES = 4
ORACLE_MAX_INPUT_NODES = 2


class OracleLimitError(Exception):
    """Network too large for the brute-force oracle."""


@dataclass(frozen=True)
class OracleVerdict:
    property: str
    positive: bool
    horizon: int
    counterexample: Optional[tuple[tuple[int, int], tuple[int, ...]]] = None
    # counterexample = ((x0, x0'), input codes); for observability the run
    # keeps outputs equal at every step, for reconstructibility it also ends
    # in distinct states at the final step.


def _check_limits(bcn: Bcn) -> None:
    if bcn.n > ORACLE_MAX_STATE_NODES or bcn.m > ORACLE_MAX_INPUT_NODES:
        raise OracleLimitError(
            f"oracle accepts n <= {ORACLE_MAX_STATE_NODES} and m <= {ORACLE_MAX_INPUT_NODES}, "
            f"got n={bcn.n}, m={bcn.m}"
        )


def _simulation_maps(bcn: Bcn) -> tuple[list[list[int]], list[int]]:
    nxt = [
        [step(bcn, BitVec(bcn.n, x), BitVec(bcn.m, u)).value for x in range(1 << bcn.n)]
        for u in range(1 << bcn.m)
    ]
    out = [observe(bcn, BitVec(bcn.n, x)).value for x in range(1 << bcn.n)]
    return nxt, out


def _equal_output_pairs(out: list[int], include_diagonal: bool) -> list[tuple[int, int]]:
    pairs = []
    for a in range(len(out)):
        for b in range(a if include_diagonal else a + 1, len(out)):
            if out[a] == out[b]:
                pairs.append((a, b))
    return pairs


def oracle_observable(bcn: Bcn, horizon: Optional[int] = None) -> OracleVerdict:
    """Search for two distinct initial states with an output-preserving input run.

    A run of length L = number of equal-output pairs (diagonal included)
    must revisit a pair, so it extends to an infinite run: reaching depth L
    certifies unobservability.  A revisit along the current search path is
    the same certificate found early.  ``horizon`` exists only for
    soundness regression tests.
    """
    _check_limits(bcn)
    nxt, out = _simulation_maps(bcn)
    members = _equal_output_pairs(out, include_diagonal=True)
    depth_limit = len(members) if horizon is None else horizon
    inputs = range(1 << bcn.m)

    def search(a: int, b: int, path: list[int], on_path: set[tuple[int, int]]) -> Optional[list[int]]:
        if len(path) >= depth_limit:
            return list(path)
        for u in inputs:
            na, nb = nxt[u][a], nxt[u][b]
            if na > nb:
                na, nb = nb, na
            if out[na] != out[nb]:
                continue
            if (na, nb) in on_path:
                return list(path) + [u]
            on_path.add((na, nb))
            path.append(u)
            found = search(na, nb, path, on_path)
            if found is not None:
                return found
            path.pop()
            on_path.discard((na, nb))
        return None

    for a, b in members:
        if a == b:
            continue
        found = search(a, b, [], {(a, b)})
        if found is not None:
            return OracleVerdict(
                "observability", False, depth_limit, ((a, b), tuple(found))
            )
    return OracleVerdict("observability", True, depth_limit)


def oracle_reconstructible(bcn: Bcn, horizon: Optional[int] = None) -> OracleVerdict:
    """Search for arbitrarily extensible runs of distinct equal-output states.

    With p = number of non-diagonal equal-output pairs, a violating run of
    p+1 steps (states distinct and outputs equal at every step through p+1)
    must revisit a non-diagonal pair, and pumping that loop defeats every
    finite horizon.  Distinct states at step p+1 force distinctness at all
    earlier steps, so diagonal pairs prune exactly.
    """
    _check_limits(bcn)
    nxt, out = _simulation_maps(bcn)
    members = _equal_output_pairs(out, include_diagonal=False)
    p = len(members) if horizon is None else horizon
    target_depth = p + 1
    inputs = range(1 << bcn.m)

    def search(a: int, b: int, path: list[int], trail: dict[tuple[int, int], int]) -> Optional[list[int]]:
        if len(path) >= target_depth:
            return list(path)
        for u in inputs:
            na, nb = nxt[u][a], nxt[u][b]
            if na > nb:
                na, nb = nb, na
            if na == nb or out[na] != out[nb]:
                continue
            if (na, nb) in trail:
                # pump the discovered loop until the run is long enough
                loop = path[trail[(na, nb)]:] + [u]
                run = list(path) + [u]
                while len(run) < target_depth:
                    run.extend(loop)
                return run[:target_depth]
            trail[(na, nb)] = len(path) + 1
            path.append(u)
            found = search(na, nb, path, trail)
            if found is not None:
                return found
            path.pop()
            del trail[(na, nb)]
        return None

    for a, b in members:
        found = search(a, b, [], {(a, b): 0})
        if found is not None:
            return OracleVerdict(
                "reconstructibility", False, p, ((a, b), tuple(found))
            )
    return OracleVerdict("reconstructibility", True, p)
