"""Exact k-hop topological closeness: walk counts on the self-loop augmented graph.

Three independent routes to the same numbers:

* :func:`tc_bruteforce` enumerates step sequences depth-first (no matrix math);
* :func:`tc_matrix_power` multiplies dense ``(A + I)`` powers;
* :func:`tc_vector` propagates one source through the sparse augmented adjacency.

Counts are exact int64; anything that could leave the int64 range raises
:class:`WalkCountOverflowError` instead of wrapping.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import BudgetExceededError, PreconditionError, WalkCountOverflowError
from .graph_core import BipartiteGraph, GeneralGraph, as_general

WalkCount = int

INT64_SAFE = float(2**62)
DEFAULT_STEP_BUDGET = 10**8
DEFAULT_MAX_DENSE_NODES = 4096


@dataclass(frozen=True)
class TcMatrix:
    k: int
    entries: np.ndarray

    def __getitem__(self, pair) -> WalkCount:
        return int(self.entries[pair])


def _check_node(g: GeneralGraph, node: int) -> None:
    if not 0 <= node < g.num_nodes:
        raise PreconditionError(f"node {node} out of range for {g.num_nodes} nodes")


def tc_walk_counts(g, source: int, k: int, budget: int = DEFAULT_STEP_BUDGET) -> Counter:
    """Endpoint multiset of every length-``k`` step sequence from ``source``.

    Each step moves to a neighbor or stays put. The enumeration visits every
    sequence explicitly, so the cost is the number of sequences; ``budget``
    caps the number of steps taken.
    """
    g = as_general(g)
    if k < 0:
        raise PreconditionError("k must be non-negative")
    _check_node(g, source)
    choices = [(w,) + g.adjacency[w] for w in range(g.num_nodes)]
    ends: Counter = Counter()
    steps = 0
    stack = [(source, 0)]
    while stack:
        node, depth = stack.pop()
        if depth == k:
            ends[node] += 1
            continue
        nxt = choices[node]
        steps += len(nxt)
        if steps > budget:
            raise BudgetExceededError(f"walk enumeration from {source} at k={k} exceeded {budget} steps")
        stack.extend((w, depth + 1) for w in nxt)
    return ends


def tc_bruteforce(g, u: int, v: int, k: int, budget: int = DEFAULT_STEP_BUDGET) -> WalkCount:
    """k-TC(u, v) by exhaustive walk enumeration."""
    g = as_general(g)
    _check_node(g, v)
    return tc_walk_counts(g, u, k, budget)[v]


def _augmented_dense(g: GeneralGraph) -> np.ndarray:
    m = np.eye(g.num_nodes, dtype=np.int64)
    for u, row in enumerate(g.adjacency):
        m[u, list(row)] = 1
    return m


def _checked_matmul(left: np.ndarray, right: np.ndarray, what: str) -> np.ndarray:
    # cheap bound first, float shadow product only when the bound is inconclusive
    if left.size and right.size:
        bound = float(np.abs(left).astype(np.float64).sum(axis=1).max()) * float(np.abs(right).max())
        if bound >= INT64_SAFE:
            shadow = left.astype(np.float64) @ right.astype(np.float64)
            if np.abs(shadow).max() >= INT64_SAFE:
                r, c = np.unravel_index(np.argmax(np.abs(shadow)), shadow.shape)
                raise WalkCountOverflowError(f"{what}: count at pair ({r}, {c}) exceeds int64")
    return left @ right


def tc_matrix_power(g, k: int, max_nodes: int = DEFAULT_MAX_DENSE_NODES) -> TcMatrix:
    """All-pairs k-TC as ``(A + I)^k`` by ``k`` successive products."""
    g = as_general(g)
    if k < 0:
        raise PreconditionError("k must be non-negative")
    if g.num_nodes > max_nodes:
        raise PreconditionError(f"{g.num_nodes} nodes exceed the dense limit of {max_nodes}")
    m = _augmented_dense(g)
    t = np.eye(g.num_nodes, dtype=np.int64)
    for step in range(1, k + 1):
        t = _checked_matmul(t, m, f"{step}-TC")
    t.setflags(write=False)
    return TcMatrix(k, t)


def augmented_adjacency(g) -> sp.csr_matrix:
    """Sparse ``A + I`` over all nodes (users first for bipartite input)."""
    if isinstance(g, BipartiteGraph):
        U, I = g.num_users, g.num_items
        a = sp.bmat([[None, g.forward], [g.backward, None]], format="csr", dtype=np.int64)
        if a.shape != (U + I, U + I):
            a = sp.csr_matrix(a, shape=(U + I, U + I))
    else:
        a = as_general(g).to_scipy()
    return (a + sp.identity(a.shape[0], dtype=np.int64, format="csr")).tocsr()


def tc_vector(g, source: int, k: int, aug: sp.csr_matrix | None = None) -> np.ndarray:
    """k-TC(source, w) for every node ``w`` via ``k`` sparse propagations."""
    if k < 0:
        raise PreconditionError("k must be non-negative")
    aug = augmented_adjacency(g) if aug is None else aug
    n = aug.shape[0]
    if not 0 <= source < n:
        raise PreconditionError(f"node {source} out of range for {n} nodes")
    row_nnz = np.diff(aug.indptr)
    x = np.zeros(n, dtype=np.int64)
    x[source] = 1
    for step in range(1, k + 1):
        # sum of outputs is bounded by sum_w x[w] * (deg(w) + 1)
        if float(np.dot(x.astype(np.float64), row_nnz)) >= INT64_SAFE:
            raise WalkCountOverflowError(f"{step}-TC from node {source} exceeds int64")
        x = aug @ x
    return x


def tc_user_items(g: BipartiteGraph, user: int, k: int, aug: sp.csr_matrix | None = None) -> np.ndarray:
    """k-TC(user, item) for all items of a bipartite graph."""
    if not 0 <= user < g.num_users:
        raise PreconditionError(f"user {user} out of range")
    return tc_vector(g, user, k, aug)[g.num_users:]


def tc_ranking(g: BipartiteGraph, user: int, k: int, aug: sp.csr_matrix | None = None) -> list[int]:
    """Items by descending k-TC to ``user``; ties go to the lower item index."""
    scores = tc_user_items(g, user, k, aug)
    return [int(i) for i in np.argsort(-scores, kind="stable")]
