"""All-rank evaluation, rank correlation, and the closeness-difference experiment."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import PreconditionError
from .graph_core import DatasetSplit
from .gte import DEFAULT_LAYERS, gte_score_users, iter_user_batches, top_n_rows
from .report import EvalReport, MetricRow
from .tc_oracle import augmented_adjacency, tc_user_items

DEFAULT_TOPN = (20, 40)


def _hits(ranking, positives, n: int) -> np.ndarray:
    top = np.asarray(ranking, dtype=np.int64)[:n]
    return np.isin(top, np.asarray(positives, dtype=np.int64))


def recall_at_n(ranking, positives, n: int) -> float:
    """Share of the positives found in the first ``n`` ranked items."""
    if len(positives) == 0:
        raise PreconditionError("recall needs at least one positive")
    return int(_hits(ranking, positives, n).sum()) / len(positives)


def ndcg_at_n(ranking, positives, n: int) -> float:
    """Binary-relevance NDCG; the ideal list fills ``min(|positives|, n)`` slots."""
    if len(positives) == 0:
        raise PreconditionError("NDCG needs at least one positive")
    hits = _hits(ranking, positives, n)
    discounts = 1.0 / np.log2(np.arange(2, len(hits) + 2))
    dcg = float(discounts[hits].sum())
    ideal = min(len(positives), n)
    idcg = float((1.0 / np.log2(np.arange(2, ideal + 2))).sum())
    return dcg / idcg


def kendall_tau(a, b) -> float:
    """Tie-corrected Kendall tau-b between two score (or rank) vectors over the same items.

    Raises :class:`PreconditionError` when tau is undefined: fewer than two
    items, or either side constant.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise PreconditionError("kendall_tau needs two equal-length vectors")
    if len(a) < 2:
        raise PreconditionError("kendall_tau needs at least two items")
    if np.all(a == a[0]) or np.all(b == b[0]):
        raise PreconditionError("kendall_tau is undefined when one side is constant")
    return float(stats.kendalltau(a, b, variant="b").statistic)


def positions(ranking, num_items: int | None = None) -> np.ndarray:
    """Turn an ordered item list into per-item rank positions (smaller is better)."""
    ranking = np.asarray(ranking, dtype=np.int64)
    num_items = len(ranking) if num_items is None else num_items
    if len(ranking) != num_items or len(np.unique(ranking)) != num_items:
        raise PreconditionError("ranking must be a permutation of the item set")
    pos = np.empty(num_items, dtype=np.int64)
    pos[ranking] = np.arange(num_items)
    return pos


def kendall_tau_rankings(rank_a, rank_b) -> float:
    """Tau between two orderings of the same items (first item ranks highest)."""
    n = len(rank_a)
    return kendall_tau(-positions(rank_a, n), -positions(rank_b, n))


def evaluate(split: DatasetSplit, layers: int = DEFAULT_LAYERS, topn=DEFAULT_TOPN, exclude_train: bool = True,
             batch_size: int = 256, workers: int = 1) -> EvalReport:
    """Score every user with test positives and average Recall/NDCG at each cutoff.

    Users without test positives are skipped and counted, never scored as 0.
    """
    topn = sorted({int(n) for n in topn})
    if not topn or topn[0] < 1:
        raise PreconditionError("cutoffs must be positive integers")
    start = time.perf_counter()
    g = split.train
    users = split.users_with_test()
    skipped = split.num_users - len(users)
    nmax = topn[-1]

    def run(batch):
        scores = gte_score_users(g, batch, layers)
        excl = [g.items_of(u) for u in batch] if exclude_train else None
        ranked = top_n_rows(scores, nmax, excl)
        rec = np.empty((len(batch), len(topn)))
        ndcg = np.empty((len(batch), len(topn)))
        for r, (u, items) in enumerate(zip(batch, ranked)):
            pos = split.test_positives[u]
            for c, n in enumerate(topn):
                rec[r, c] = recall_at_n(items, pos, n)
                ndcg[r, c] = ndcg_at_n(items, pos, n)
        return rec, ndcg

    batches = list(iter_user_batches(g.num_users, users, batch_size))
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, batches))
    else:
        parts = [run(b) for b in batches]
    if parts:
        rec = np.vstack([p[0] for p in parts])
        ndcg = np.vstack([p[1] for p in parts])
    else:
        rec = ndcg = np.zeros((0, len(topn)))
    rows = []
    count = len(users)
    for c, n in enumerate(topn):
        r = math.fsum(rec[:, c]) / count if count else float("nan")
        d = math.fsum(ndcg[:, c]) / count if count else float("nan")
        rows.append(MetricRow("recall", n, r, count, skipped))
        rows.append(MetricRow("ndcg", n, d, count, skipped))
    config = {"layers": layers, "topn": ",".join(map(str, topn)), "exclude_train": exclude_train,
              "users": split.num_users, "items": split.num_items, "train_edges": g.num_edges}
    return EvalReport(rows, time.perf_counter() - start, config)


@dataclass(frozen=True)
class TcDiffSample:
    user: int
    pos: int
    neg: int
    k: int
    diff: int


@dataclass
class TcDiffResult:
    samples: list
    requested: int
    partial: bool
    k: int
    seed: int

    @property
    def diffs(self) -> np.ndarray:
        return np.array([s.diff for s in self.samples], dtype=np.int64)

    @property
    def positive_fraction(self) -> float | None:
        """Share of strictly positive differences, ``None`` when nothing was sampled."""
        if not self.samples:
            return None
        return float(np.count_nonzero(self.diffs > 0)) / len(self.samples)

    def histogram(self, bins: int = 10):
        if not self.samples:
            return None
        return np.histogram(self.diffs, bins=bins)

    def summary(self) -> dict:
        d = self.diffs
        return {
            "samples": len(self.samples),
            "requested": self.requested,
            "partial": self.partial,
            "k": self.k,
            "seed": self.seed,
            "positive": int(np.count_nonzero(d > 0)),
            "zero": int(np.count_nonzero(d == 0)),
            "negative": int(np.count_nonzero(d < 0)),
            "positive_fraction": self.positive_fraction,
        }


def tc_difference_experiment(split: DatasetSplit, samples: int = 400, k: int = DEFAULT_LAYERS, seed: int = 0,
                             max_draws: int | None = None) -> TcDiffResult:
    """Sample (user, positive, negative) triples and compare their closeness to the user.

    A triple draws a test interaction uniformly, then a negative uniformly
    among items the user touched in neither train nor test. Closeness is
    measured on the train graph only. Users with no admissible negative are
    redrawn; if ``max_draws`` runs out the result is flagged partial.
    """
    if samples < 0:
        raise PreconditionError("samples must be non-negative")
    g = split.train
    test_users = np.repeat(np.arange(split.num_users), [len(t) for t in split.test_positives])
    test_items = np.concatenate([np.asarray(t, dtype=np.int64) for t in split.test_positives]) \
        if split.num_users else np.zeros(0, dtype=np.int64)
    if samples and len(test_users) == 0:
        raise PreconditionError("test set is empty")
    max_draws = 100 * samples + 100 if max_draws is None else max_draws
    rng = np.random.default_rng(seed)
    aug = augmented_adjacency(g) if samples else None
    cache: dict[int, np.ndarray] = {}
    out: list[TcDiffSample] = []
    draws = 0
    while len(out) < samples and draws < max_draws:
        draws += 1
        idx = int(rng.integers(len(test_users)))
        u, pos = int(test_users[idx]), int(test_items[idx])
        forbidden = np.union1d(g.items_of(u), split.test_positives[u])
        if len(forbidden) >= g.num_items:
            continue
        allowed = np.setdiff1d(np.arange(g.num_items), forbidden, assume_unique=True)
        neg = int(allowed[rng.integers(len(allowed))])
        if u not in cache:
            cache[u] = tc_user_items(g, u, k, aug)
        tc = cache[u]
        out.append(TcDiffSample(u, pos, neg, k, int(tc[pos]) - int(tc[neg])))
    return TcDiffResult(out, samples, len(out) < samples, k, seed)


def write_tcdiff_csv(result: TcDiffResult, path, ids=None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("user,pos,neg,k,diff\n")
        for s in result.samples:
            u, p, n = s.user, s.pos, s.neg
            if ids is not None:
                u, p, n = ids.user_ids[u], ids.item_ids[p], ids.item_ids[n]
            fh.write(f"{u},{p},{n},{s.k},{s.diff}\n")
