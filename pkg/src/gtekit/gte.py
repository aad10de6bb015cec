"""Graph Topology Encoder: learning-less propagation of one-hot item features.

Every user's feature row after ``L`` layers holds, per item, the number of
length-``L`` walks on the self-loop augmented graph. The row is the score
vector used for recommendation.

Two computation paths with identical results:

* :func:`gte_full` runs the dense layer recursion over all users and items
  (test and small-graph use only);
* :func:`gte_score_users` propagates user indicators through the sparse
  bipartite adjacency, never materialising the ``U x I`` matrix beyond one
  batch. This is the production path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import MemoryBudgetError, PreconditionError, WalkCountOverflowError
from .graph_core import BipartiteGraph

DEFAULT_LAYERS = 3
DEFAULT_MEMORY_BUDGET = 512 * 2**20
INT64_SAFE = float(2**62)
_DENSE_FRACTION = 0.1


@dataclass(frozen=True)
class ScoreVector:
    user: int
    scores: np.ndarray
    layers: int


@dataclass(frozen=True)
class Ranking:
    user: int
    items: np.ndarray
    scores: np.ndarray

    def __len__(self):
        return len(self.items)


def _bound_check(base, adj_rowsum_max: int, msg_max: int, what: str):
    if float(base) + float(adj_rowsum_max) * float(msg_max) >= INT64_SAFE:
        raise WalkCountOverflowError(f"{what} may exceed int64")


def gte_full(g: BipartiteGraph, layers: int = DEFAULT_LAYERS, memory_budget: int = DEFAULT_MEMORY_BUDGET) -> np.ndarray:
    """User features after ``layers`` rounds, as a dense ``U x I`` int64 array."""
    if layers < 0:
        raise PreconditionError("layers must be non-negative")
    U, I = g.num_users, g.num_items
    need = 2 * 8 * (U * I + I * I)
    if need > memory_budget:
        raise MemoryBudgetError(
            f"dense features need {need / 2**20:.1f} MiB (> {memory_budget / 2**20:.1f} MiB); "
            "use gte_score_user / gte_score_users instead"
        )
    a, at = g.forward, g.backward
    max_udeg = int(g.user_degrees().max(initial=0))
    max_ideg = int(g.item_degrees().max(initial=0))
    hu = np.zeros((U, I), dtype=np.int64)
    hv = np.eye(I, dtype=np.int64)
    for k in range(1, layers + 1):
        mu, mv = int(hu.max(initial=0)), int(hv.max(initial=0))
        _bound_check(mu, max_udeg, mv, f"user features at layer {k}")
        _bound_check(mv, max_ideg, mu, f"item features at layer {k}")
        # both assignments read layer k-1
        hu, hv = np.asarray(a @ hv) + hu, np.asarray(at @ hu) + hv
    return hu


def _as_dense(m):
    return m.toarray() if sp.issparse(m) else m


def _maybe_densify(m):
    if sp.issparse(m) and m.nnz > _DENSE_FRACTION * m.shape[0] * m.shape[1]:
        return m.toarray()
    return m


def _add(x, y):
    if sp.issparse(x) and sp.issparse(y):
        return x + y
    return np.asarray(_as_dense(x)) + np.asarray(_as_dense(y))


def _absmax(m) -> int:
    if sp.issparse(m):
        return int(abs(m).max()) if m.nnz else 0
    return int(np.abs(m).max(initial=0))


def _checked_product(adj: sp.csr_matrix, x, max_rowsum: int, base_max: int, users, what: str):
    xm = _absmax(x)
    if float(base_max) + float(max_rowsum) * float(xm) >= INT64_SAFE:
        # inconclusive bound: verify with a float shadow product
        shadow = adj.astype(np.float64) @ (x.astype(np.float64))
        shadow = _as_dense(shadow)
        if np.abs(shadow).max(initial=0) + base_max >= INT64_SAFE:
            col = int(np.argmax(np.abs(shadow).max(axis=0)))
            raise WalkCountOverflowError(f"{what} for user {int(users[col])} exceeds int64")
    return adj @ x


def gte_score_users(g: BipartiteGraph, users, layers: int = DEFAULT_LAYERS) -> np.ndarray:
    """Score rows for a batch of users, shape ``(len(users), I)``, exact int64.

    Keeps the user-side and item-side states of the batch (one column per
    queried user) and updates both from the previous layer. Columns start
    sparse and switch to dense storage once they fill up.
    """
    if layers < 0:
        raise PreconditionError("layers must be non-negative")
    users = np.asarray(users, dtype=np.int64).reshape(-1)
    U, I = g.num_users, g.num_items
    if users.size and (users.min() < 0 or users.max() >= U):
        raise PreconditionError("user index out of range")
    b = len(users)
    a, at = g.forward, g.backward
    max_udeg = int(g.user_degrees().max(initial=0))
    max_ideg = int(g.item_degrees().max(initial=0))
    xu = sp.csc_matrix((np.ones(b, dtype=np.int64), (users, np.arange(b))), shape=(U, b))
    xi = sp.csc_matrix((I, b), dtype=np.int64)
    for k in range(1, layers + 1):
        new_i = _add(_checked_product(at, xu, max_ideg, _absmax(xi), users, f"layer {k} item state"), xi)
        if k < layers:
            new_u = _add(_checked_product(a, xi, max_udeg, _absmax(xu), users, f"layer {k} user state"), xu)
            xu = _maybe_densify(new_u)
        xi = _maybe_densify(new_i)
    out = _as_dense(xi).T
    return np.ascontiguousarray(out, dtype=np.int64)


def gte_score_user(g: BipartiteGraph, user: int, layers: int = DEFAULT_LAYERS) -> ScoreVector:
    scores = gte_score_users(g, [user], layers)[0]
    scores.setflags(write=False)
    return ScoreVector(int(user), scores, layers)


def _order(scores: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    # descending score, ascending index on ties
    return candidates[np.lexsort((candidates, -scores[candidates]))]


def top_n(s: ScoreVector, n: int, exclude=None) -> Ranking:
    """The first ``n`` items by score with ``exclude`` removed; shorter if fewer remain."""
    if n < 1:
        raise PreconditionError("n must be at least 1")
    scores = np.asarray(s.scores)
    keep = np.ones(len(scores), dtype=bool)
    if exclude is not None and len(exclude):
        keep[np.asarray(exclude, dtype=np.int64)] = False
    cand = np.flatnonzero(keep)
    items = _order(scores, cand)[:n]
    return Ranking(s.user, items, scores[items])


def top_n_rows(scores: np.ndarray, n: int, excludes=None) -> list[np.ndarray]:
    """Batched :func:`top_n` over score rows; same ordering contract.

    Uses partial selection, so cost per row is linear in the item count.
    """
    if n < 1:
        raise PreconditionError("n must be at least 1")
    out = []
    num_items = scores.shape[1]
    work = np.empty(num_items, dtype=np.int64)
    for r in range(scores.shape[0]):
        np.copyto(work, scores[r])
        if excludes is not None and len(excludes[r]):
            work[np.asarray(excludes[r], dtype=np.int64)] = -1
        remaining = int(np.count_nonzero(work >= 0))
        m = min(n, remaining)
        if m <= 0:
            out.append(np.zeros(0, dtype=np.int64))
            continue
        if m < num_items:
            kth = np.partition(work, num_items - m)[num_items - m]
        else:
            kth = work.min()
        kth = max(int(kth), 0)
        above = np.flatnonzero(work > kth)
        tied = np.flatnonzero(work == kth)[: m - len(above)]
        cand = np.concatenate([above, tied])
        out.append(_order(work, cand))
    return out


def iter_user_batches(num_users: int, users=None, batch_size: int = 512):
    users = np.arange(num_users, dtype=np.int64) if users is None else np.asarray(users, dtype=np.int64)
    for start in range(0, len(users), batch_size):
        yield users[start:start + batch_size]


def recommend(g: BipartiteGraph, layers: int = DEFAULT_LAYERS, n: int = 20, exclude_train: bool = True,
              users=None, batch_size: int = 512):
    """Yield :class:`Ranking` for each requested user, in order."""
    for batch in iter_user_batches(g.num_users, users, batch_size):
        scores = gte_score_users(g, batch, layers)
        excl = [g.items_of(u) for u in batch] if exclude_train else None
        for row, (u, items) in enumerate(zip(batch, top_n_rows(scores, n, excl))):
            yield Ranking(int(u), items, scores[row, items])
