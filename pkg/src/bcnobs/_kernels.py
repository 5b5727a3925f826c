"""Hot kernels for pair-graph construction and condensation.

Each kernel has a numba ``@njit`` implementation and a numpy
(or plain-Python) fallback producing bit-identical results.  Selection is
controlled by the ``BCNOBS_BACKEND`` environment variable:

* ``auto`` (default): numba when importable, else the fallback,
* ``numba``: require numba, fail loudly if missing,
* ``numpy``: force the fallback (useful for debugging and benchmarking).

``benchmarks/bench_backends.py`` compares the two paths.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "HAS_NUMBA",
    "active_backend",
    "member_pairs",
    "successor_edges",
    "tarjan_scc",
    "propagate_reachability",
]

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAS_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        raise RuntimeError("numba is not installed")


_BACKEND_ENV = "BCNOBS_BACKEND"


def active_backend() -> str:
    """Resolve the kernel backend from the environment."""
    choice = os.environ.get(_BACKEND_ENV, "auto").strip().lower() or "auto"
    if choice == "auto":
        return "numba" if HAS_NUMBA else "numpy"
    if choice == "numba":
        if not HAS_NUMBA:
            raise RuntimeError(
                f"{_BACKEND_ENV}=numba requested but numba is not importable"
            )
        return "numba"
    if choice == "numpy":
        return "numpy"
    raise RuntimeError(f"unknown {_BACKEND_ENV} value {choice!r}")


# ---------------------------------------------------------------------------
# Member pair enumeration (shared, vectorized)
# ---------------------------------------------------------------------------


def member_pairs(out: np.ndarray, include_diagonal: bool) -> tuple[np.ndarray, np.ndarray]:
    """Enumerate unordered state pairs with equal output code.

    Returns (lo, hi) int64 arrays sorted lexicographically by (lo, hi);
    lo <= hi, with lo == hi (diagonal pairs) only when requested.
    """
    order = np.argsort(out, kind="stable")
    sorted_out = out[order]
    split = np.flatnonzero(sorted_out[1:] != sorted_out[:-1]) + 1
    los, his = [], []
    k = 0 if include_diagonal else 1
    for members in np.split(order, split):
        members = np.sort(members)
        i, j = np.triu_indices(len(members), k=k)
        los.append(members[i])
        his.append(members[j])
    lo = np.concatenate(los) if los else np.zeros(0, dtype=np.int64)
    hi = np.concatenate(his) if his else np.zeros(0, dtype=np.int64)
    lo = lo.astype(np.int64, copy=False)
    hi = hi.astype(np.int64, copy=False)
    perm = np.lexsort((hi, lo))
    return lo[perm], hi[perm]


# ---------------------------------------------------------------------------
# Successor edge construction
# ---------------------------------------------------------------------------


def _edges_numpy(lo, hi, keys, trans, out, exclude_diagonal):
    nstates = out.shape[0]
    srcs, dsts, inps = [], [], []
    for u in range(trans.shape[0]):
        row = trans[u]
        p = row[lo]
        q = row[hi]
        a = np.minimum(p, q)
        b = np.maximum(p, q)
        mask = out[a] == out[b]
        if exclude_diagonal:
            mask &= a != b
        src = np.flatnonzero(mask)
        dst = np.searchsorted(keys, a[src] * nstates + b[src])
        srcs.append(src)
        dsts.append(dst)
        inps.append(np.full(src.shape[0], u, dtype=np.int64))
    if not srcs:
        z = np.zeros(0, dtype=np.int64)
        return z, z.copy(), z.copy()
    return (
        np.concatenate(srcs).astype(np.int64),
        np.concatenate(dsts),
        np.concatenate(inps),
    )


if HAS_NUMBA:

    @njit(cache=True)
    def _edges_numba(lo, hi, keys, trans, out, exclude_diagonal):  # pragma: no cover - jit
        nverts = lo.shape[0]
        ninputs = trans.shape[0]
        nstates = out.shape[0]
        count = 0
        for v in range(nverts):
            for u in range(ninputs):
                p = trans[u, lo[v]]
                q = trans[u, hi[v]]
                if p > q:
                    p, q = q, p
                if out[p] != out[q]:
                    continue
                if exclude_diagonal and p == q:
                    continue
                count += 1
        src = np.empty(count, dtype=np.int64)
        dst = np.empty(count, dtype=np.int64)
        inp = np.empty(count, dtype=np.int64)
        e = 0
        for v in range(nverts):
            for u in range(ninputs):
                p = trans[u, lo[v]]
                q = trans[u, hi[v]]
                if p > q:
                    p, q = q, p
                if out[p] != out[q]:
                    continue
                if exclude_diagonal and p == q:
                    continue
                key = p * nstates + q
                idx = np.searchsorted(keys, key)
                src[e] = v
                dst[e] = idx
                inp[e] = u
                e += 1
        return src, dst, inp


def successor_edges(lo, hi, keys, trans, out, exclude_diagonal: bool):
    """(src, dst, input) triples for every pair transition landing on a vertex.

    ``keys`` must be the sorted array ``lo * 2**n + hi`` for the vertex set;
    every surviving successor pair is guaranteed to be a member, so the
    binary search always hits.  Triples are returned sorted by
    (src, dst, input), identically on both backends.
    """
    if active_backend() == "numba":
        src, dst, inp = _edges_numba(lo, hi, keys, trans, out, exclude_diagonal)
    else:
        src, dst, inp = _edges_numpy(lo, hi, keys, trans, out, exclude_diagonal)
    perm = np.lexsort((inp, dst, src))
    return src[perm], dst[perm], inp[perm]


# ---------------------------------------------------------------------------
# Strongly connected components (iterative Tarjan on CSR)
# ---------------------------------------------------------------------------


def _tarjan_python(indptr, indices, nverts):
    UNVISITED = -1
    index = [UNVISITED] * nverts
    low = [0] * nverts
    on_stack = [False] * nverts
    comp = [UNVISITED] * nverts
    stack: list[int] = []
    counter = 0
    ncomp = 0
    for root in range(nverts):
        if index[root] != UNVISITED:
            continue
        work = [(root, indptr[root])]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, ptr = work[-1]
            if ptr < indptr[v + 1]:
                work[-1] = (v, ptr + 1)
                w = indices[ptr]
                if index[w] == UNVISITED:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, indptr[w]))
                elif on_stack[w]:
                    if index[w] < low[v]:
                        low[v] = index[w]
            else:
                work.pop()
                if work:
                    parent = work[-1][0]
                    if low[v] < low[parent]:
                        low[parent] = low[v]
                if low[v] == index[v]:
                    while True:
                        w = stack.pop()
                        on_stack[w] = False
                        comp[w] = ncomp
                        if w == v:
                            break
                    ncomp += 1
    return np.array(comp, dtype=np.int64), ncomp


if HAS_NUMBA:

    @njit(cache=True)
    def _tarjan_numba(indptr, indices, nverts):  # pragma: no cover - jit
        UNVISITED = -1
        index = np.full(nverts, UNVISITED, dtype=np.int64)
        low = np.zeros(nverts, dtype=np.int64)
        on_stack = np.zeros(nverts, dtype=np.bool_)
        comp = np.full(nverts, UNVISITED, dtype=np.int64)
        stack = np.empty(nverts, dtype=np.int64)
        stack_top = 0
        work_v = np.empty(nverts, dtype=np.int64)
        work_p = np.empty(nverts, dtype=np.int64)
        counter = 0
        ncomp = 0
        for root in range(nverts):
            if index[root] != UNVISITED:
                continue
            work_top = 0
            work_v[0] = root
            work_p[0] = indptr[root]
            work_top = 1
            index[root] = counter
            low[root] = counter
            counter += 1
            stack[stack_top] = root
            stack_top += 1
            on_stack[root] = True
            while work_top > 0:
                v = work_v[work_top - 1]
                ptr = work_p[work_top - 1]
                if ptr < indptr[v + 1]:
                    work_p[work_top - 1] = ptr + 1
                    w = indices[ptr]
                    if index[w] == UNVISITED:
                        index[w] = counter
                        low[w] = counter
                        counter += 1
                        stack[stack_top] = w
                        stack_top += 1
                        on_stack[w] = True
                        work_v[work_top] = w
                        work_p[work_top] = indptr[w]
                        work_top += 1
                    elif on_stack[w]:
                        if index[w] < low[v]:
                            low[v] = index[w]
                else:
                    work_top -= 1
                    if work_top > 0:
                        parent = work_v[work_top - 1]
                        if low[v] < low[parent]:
                            low[parent] = low[v]
                    if low[v] == index[v]:
                        while True:
                            w = stack[stack_top - 1]
                            stack_top -= 1
                            on_stack[w] = False
                            comp[w] = ncomp
                            if w == v:
                                break
                        ncomp += 1
        return comp, ncomp


def tarjan_scc(indptr: np.ndarray, indices: np.ndarray, nverts: int):
    """Strongly connected components of a CSR digraph.

    Returns (comp, ncomp) with component ids assigned in pop order, so
    comp[dst] <= comp[src] holds for every edge (reverse topological order
    of the condensation).  Both backends traverse identically and return
    identical numbering.
    """
    if nverts == 0:
        return np.zeros(0, dtype=np.int64), 0
    if active_backend() == "numba":
        return _tarjan_numba(indptr, indices, nverts)
    return _tarjan_python(indptr, indices, nverts)


# ---------------------------------------------------------------------------
# Condensation reachability
# ---------------------------------------------------------------------------


def _reach_python(comp_src, comp_dst, reach):
    for e in range(comp_src.shape[0]):
        if reach[comp_dst[e]]:
            reach[comp_src[e]] = True
    return reach


if HAS_NUMBA:

    @njit(cache=True)
    def _reach_numba(comp_src, comp_dst, reach):  # pragma: no cover - jit
        for e in range(comp_src.shape[0]):
            if reach[comp_dst[e]]:
                reach[comp_src[e]] = True
        return reach


def propagate_reachability(comp_src: np.ndarray, comp_dst: np.ndarray, seed: np.ndarray) -> np.ndarray:
    """Mark components that can reach a seed component.

    Requires Tarjan numbering (comp_dst < comp_src on cross edges); a single
    pass over edges sorted by source component ascending is then complete.
    """
    order = np.argsort(comp_src, kind="stable")
    comp_src = np.ascontiguousarray(comp_src[order])
    comp_dst = np.ascontiguousarray(comp_dst[order])
    reach = seed.copy()
    if active_backend() == "numba":
        return _reach_numba(comp_src, comp_dst, reach)
    return _reach_python(comp_src, comp_dst, reach)
