"""The simplified embedding-propagation recommender with random initial embeddings.

Embeddings are summed over neighbors plus the node's own previous embedding
(identity activation and identity message map), and a user-item score is the
inner product of the final-layer embeddings. This module checks that every
layer-``L`` embedding equals the walk-count-weighted sum of initial
embeddings, and searches for graphs where the inner-product score disagrees
with the walk-count order.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NonFiniteError, PreconditionError
from .graph_core import BipartiteGraph
from .gte import gte_full
from .tc_oracle import augmented_adjacency, tc_matrix_power, tc_user_items

FROZEN_SEARCH_SEED = 20231021
GAUSSIAN = "gaussian(0, 1/sqrt(d))"


@dataclass(frozen=True)
class EmbeddingSet:
    """Initial embeddings, users first then items, one row per node."""

    vectors: np.ndarray
    seed: int | None = None
    distribution: str = "given"

    @classmethod
    def random(cls, num_nodes: int, dim: int, seed) -> "EmbeddingSet":
        if dim < 1:
            raise PreconditionError("embedding dimension must be at least 1")
        rng = np.random.default_rng(seed)
        vecs = rng.normal(0.0, 1.0 / math.sqrt(dim), size=(num_nodes, dim))
        vecs.setflags(write=False)
        return cls(vecs, seed, GAUSSIAN)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def scaled(self, alpha) -> "EmbeddingSet":
        return EmbeddingSet(self.vectors * alpha, self.seed, f"{alpha}*{self.distribution}")


@dataclass(frozen=True)
class ParadigmResult:
    embeddings: np.ndarray
    scores: np.ndarray
    layers: int
    distribution: str


def simplified_propagate(g: BipartiteGraph, e0: EmbeddingSet, layers: int) -> ParadigmResult:
    if layers < 0:
        raise PreconditionError("layers must be non-negative")
    x = np.asarray(e0.vectors)
    if x.ndim != 2 or x.shape[0] != g.num_nodes:
        raise PreconditionError(f"expected {g.num_nodes} embedding rows, got shape {x.shape}")
    U = g.num_users
    a, at = g.forward, g.backward
    eu, ev = x[:U], x[U:]
    floating = np.issubdtype(x.dtype, np.floating)
    for k in range(1, layers + 1):
        # both sides read layer k-1; overflow surfaces as the NonFiniteError below
        with np.errstate(over="ignore", invalid="ignore"):
            eu, ev = a @ ev + eu, at @ eu + ev
        if floating and not (np.isfinite(eu).all() and np.isfinite(ev).all()):
            raise NonFiniteError(f"non-finite embedding at layer {k}")
    with np.errstate(over="ignore", invalid="ignore"):
        scores = eu @ ev.T
    if floating and not np.isfinite(scores).all():
        raise NonFiniteError(f"non-finite score after layer {layers}")
    return ParadigmResult(np.vstack([eu, ev]), scores, layers, e0.distribution)


@dataclass
class ExpansionReport:
    layers: int
    max_relative_deviation: float
    max_abs_deviation: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.max_relative_deviation <= self.tol


def walk_weighted_embeddings(g: BipartiteGraph, e0: EmbeddingSet, layers: int) -> np.ndarray:
    """Row ``w`` is the sum over nodes ``x`` of ``layers``-TC(w, x) times ``e0[x]``."""
    tc = tc_matrix_power(g, layers).entries
    x = np.asarray(e0.vectors)
    if np.issubdtype(x.dtype, np.integer):
        return tc @ x
    return tc.astype(np.float64) @ x


def verify_walk_expansion(g: BipartiteGraph, e0: EmbeddingSet, layers: int, tol: float = 1e-9) -> ExpansionReport:
    """Propagated embeddings against the walk-count expansion of the initial ones.

    Relative deviation is the largest absolute difference divided by the
    largest magnitude on the expansion side.
    """
    lhs = simplified_propagate(g, e0, layers).embeddings
    rhs = walk_weighted_embeddings(g, e0, layers)
    diff = np.abs(lhs - rhs)
    abs_dev = float(diff.max(initial=0))
    scale = float(np.abs(rhs).max(initial=0))
    rel = abs_dev / scale if scale > 0 else abs_dev
    return ExpansionReport(layers, rel, abs_dev, tol)


def score_gap_terms(g: BipartiteGraph, e0: EmbeddingSet, layers: int, user: int, item1: int, item2: int) -> dict:
    """Split ``score(user,item1) - score(user,item2)`` into its three parts.

    With ``t1``, ``t2`` the walk counts from the user to each item, the
    embeddings decompose as ``e_u = k1 + t1*e_item1 = k2 + t2*e_item2`` and
    ``e_item1 = k3 + t1*e_user``, ``e_item2 = k4 + t2*e_user``. The gap is
    a constant part, a part linear in ``t1``/``t2`` and a quadratic part.
    """
    U = g.num_users
    tc = tc_matrix_power(g, layers).entries
    x = np.asarray(e0.vectors, dtype=np.float64)
    u, v1, v2 = user, U + item1, U + item2
    t1, t2 = int(tc[u, v1]), int(tc[u, v2])
    full_u = tc[u] @ x
    k1 = full_u - t1 * x[v1]
    k2 = full_u - t2 * x[v2]
    k3 = tc[v1] @ x - t1 * x[u]
    k4 = tc[v2] @ x - t2 * x[u]
    constant = float(k1 @ k3 - k2 @ k4)
    linear = float((k1 @ x[u] + k3 @ x[v1]) * t1 - (k2 @ x[u] + k4 @ x[v2]) * t2)
    quadratic = float(x[u] @ x[v1] * t1**2 - x[u] @ x[v2] * t2**2)
    return {"tc1": t1, "tc2": t2, "constant": constant, "linear": linear, "quadratic": quadratic,
            "gap": constant + linear + quadratic}


@dataclass(frozen=True)
class SearchParams:
    """Random small bipartite graphs: sizes drawn uniformly, edges i.i.d."""

    min_users: int = 2
    max_users: int = 10
    min_items: int = 3
    max_items: int = 10
    edge_prob: float = 0.35
    dim: int = 8
    layers: int = 3

    def __post_init__(self):
        if self.min_users < 1 or self.min_items < 2 or self.max_users < self.min_users or self.max_items < self.min_items:
            raise PreconditionError("invalid size range")
        if not 0.0 < self.edge_prob <= 1.0:
            raise PreconditionError("edge_prob must lie in (0, 1]")


@dataclass
class Counterexample:
    trial: int
    seed: int
    num_users: int
    num_items: int
    edges: list
    user: int
    item1: int
    item2: int
    tc1: int
    tc2: int
    score1: float
    score2: float
    scorer: str = "paradigm"
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Counterexample":
        return cls(**d)


@dataclass
class SearchResult:
    trials_run: int
    counterexample: Counterexample | None

    @property
    def found(self) -> bool:
        return self.counterexample is not None


def sample_trial(params: SearchParams, seed: int, trial: int) -> tuple[BipartiteGraph, EmbeddingSet]:
    """Graph and embeddings of one trial; a pure function of ``(seed, trial)``."""
    rng = np.random.default_rng([seed, trial])
    U = int(rng.integers(params.min_users, params.max_users + 1))
    I = int(rng.integers(params.min_items, params.max_items + 1))
    mask = rng.random((U, I)) < params.edge_prob
    g = BipartiteGraph.from_edges(U, I, np.argwhere(mask))
    e0 = EmbeddingSet.random(U + I, params.dim, [seed, trial, 1])
    return g, e0


def _first_disorder(tc_rows: np.ndarray, scores: np.ndarray):
    # first (user, i, j) with tc[i] > tc[j] but score[i] <= score[j]
    for u in range(tc_rows.shape[0]):
        t, s = tc_rows[u], scores[u]
        bad = (t[:, None] > t[None, :]) & (s[:, None] <= s[None, :])
        if bad.any():
            i, j = np.argwhere(bad)[0]
            return u, int(i), int(j)
    return None


def search_tc_violation(params: SearchParams = SearchParams(), trials: int = 10_000,
                        seed: int = FROZEN_SEARCH_SEED, scorer: str = "paradigm") -> SearchResult:
    """Return the lowest-index trial whose scores break the walk-count order.

    ``scorer`` selects ``"paradigm"`` (inner products of propagated random
    embeddings) or ``"gte"`` (the topology encoder, which should never break it).
    Walk counts come from the dense matrix-power oracle.
    """
    if scorer not in ("paradigm", "gte"):
        raise PreconditionError(f"unknown scorer {scorer!r}")
    if trials < 0:
        raise PreconditionError("trials must be non-negative")
    for trial in range(trials):
        g, e0 = sample_trial(params, seed, trial)
        tc = tc_matrix_power(g, params.layers).entries[: g.num_users, g.num_users:]
        if scorer == "paradigm":
            scores = simplified_propagate(g, e0, params.layers).scores
        else:
            scores = gte_full(g, params.layers)
        hit = _first_disorder(tc, scores)
        if hit is not None:
            u, i, j = hit
            ce = Counterexample(
                trial=trial, seed=seed, num_users=g.num_users, num_items=g.num_items,
                edges=[[int(a), int(b)] for a, b in g.edges()], user=u, item1=i, item2=j,
                tc1=int(tc[u, i]), tc2=int(tc[u, j]),
                score1=float(scores[u, i]), score2=float(scores[u, j]),
                scorer=scorer, params=asdict(params),
            )
            return SearchResult(trial + 1, ce)
    return SearchResult(trials, None)


def replay(ce: Counterexample) -> tuple[int, int, float, float]:
    """Recompute a stored counterexample's walk counts and scores from its seed."""
    params = SearchParams(**ce.params)
    g, e0 = sample_trial(params, ce.seed, ce.trial)
    tc = tc_user_items(g, ce.user, params.layers)
    if ce.scorer == "paradigm":
        scores = simplified_propagate(g, e0, params.layers).scores[ce.user]
    else:
        scores = gte_full(g, params.layers)[ce.user]
    return int(tc[ce.item1]), int(tc[ce.item2]), float(scores[ce.item1]), float(scores[ce.item2])


@dataclass
class KendallSummary:
    per_user: np.ndarray
    mean: float
    evaluated: int
    skipped: int


def kendall_vs_ideal(g: BipartiteGraph, scores: np.ndarray, layers: int, users=None) -> KendallSummary:
    """Per-user tau-b between a score table and the walk-count ordering.

    Users whose tau is undefined (fewer than two items, or a constant side)
    get ``nan`` and are counted as skipped.
    """
    from .evaluation import kendall_tau

    users = np.arange(g.num_users) if users is None else np.asarray(users)
    aug = augmented_adjacency(g)
    taus = np.full(len(users), np.nan)
    for row, u in enumerate(users):
        ideal = tc_user_items(g, int(u), layers, aug)
        try:
            taus[row] = kendall_tau(np.asarray(scores[row], dtype=np.float64), ideal.astype(np.float64))
        except PreconditionError:
            continue
    ok = ~np.isnan(taus)
    evaluated = int(ok.sum())
    mean = math.fsum(taus[ok]) / evaluated if evaluated else float("nan")
    return KendallSummary(taus, mean, evaluated, len(users) - evaluated)
