import itertools
import math

import numpy as np
import pytest

from gtekit.errors import PreconditionError
from gtekit.evaluation import kendall_tau, kendall_tau_rankings, ndcg_at_n, positions, recall_at_n


def naive_recall(ranking, positives, n):
    top = list(ranking)[:n]
    return sum(1 for p in positives if p in top) / len(positives)


def naive_ndcg(ranking, positives, n):
    dcg = 0.0
    for r, item in enumerate(list(ranking)[:n], start=1):
        if item in positives:
            dcg += 1 / math.log2(r + 1)
    idcg = sum(1 / math.log2(r + 1) for r in range(1, min(len(positives), n) + 1))
    return dcg / idcg


def naive_tau_b(a, b):
    conc = disc = ties_a = ties_b = 0
    for i, j in itertools.combinations(range(len(a)), 2):
        da = (a[i] > a[j]) - (a[i] < a[j])
        db = (b[i] > b[j]) - (b[i] < b[j])
        if da == 0 and db == 0:
            continue
        if da == 0:
            ties_a += 1
        elif db == 0:
            ties_b += 1
        elif da == db:
            conc += 1
        else:
            disc += 1
    return (conc - disc) / math.sqrt((conc + disc + ties_a) * (conc + disc + ties_b))


def random_cases(count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        items = int(rng.integers(5, 80))
        ranking = [int(x) for x in rng.permutation(items)]
        k = int(rng.integers(1, items + 1))
        positives = [int(x) for x in rng.choice(items, size=k, replace=False)]
        n = int(rng.integers(1, items + 5))
        yield ranking, positives, n


def test_recall_examples():
    ranking = list(range(30))
    assert recall_at_n(ranking, [0, 1], 20) == 1.0
    assert recall_at_n(ranking, [0, 24], 20) == 0.5
    assert recall_at_n(ranking, [20], 20) == 0.0


def test_ndcg_examples():
    ranking = list(range(30))
    assert ndcg_at_n(ranking, [0, 1, 2], 20) == pytest.approx(1.0, abs=1e-15)
    assert ndcg_at_n(ranking, [0, 25], 20) == pytest.approx(1 / (1 + 1 / math.log2(3)), abs=1e-12)
    assert round(ndcg_at_n(ranking, [0, 25], 20), 4) == 0.6131
    assert ndcg_at_n(ranking, [21, 22], 20) == 0.0


def test_ndcg_ideal_truncated_at_n():
    # more positives than slots: a perfect top-2 is still 1
    assert ndcg_at_n([0, 1, 2, 3], [0, 1, 2], 2) == pytest.approx(1.0)


def test_empty_positives_rejected():
    with pytest.raises(PreconditionError):
        recall_at_n([0, 1], [], 1)
    with pytest.raises(PreconditionError):
        ndcg_at_n([0, 1], [], 1)


def test_metrics_match_naive():
    for ranking, positives, n in random_cases(100, 0):
        assert recall_at_n(ranking, positives, n) == naive_recall(ranking, positives, n)
        assert abs(ndcg_at_n(ranking, positives, n) - naive_ndcg(ranking, positives, n)) <= 1e-12


def test_tau_examples():
    assert kendall_tau_rankings([0, 1, 2, 3], [0, 1, 2, 3]) == pytest.approx(1.0)
    assert kendall_tau_rankings([0, 1, 2, 3], [3, 2, 1, 0]) == pytest.approx(-1.0)
    assert kendall_tau_rankings([0, 1, 2, 3], [1, 0, 2, 3]) == pytest.approx(4 / 6, abs=1e-12)


def test_tau_matches_naive_with_ties():
    rng = np.random.default_rng(4)
    for _ in range(100):
        n = int(rng.integers(2, 40))
        a = rng.integers(0, 5, size=n)
        b = rng.integers(0, 5, size=n)
        if len(set(a)) < 2 or len(set(b)) < 2:
            continue
        assert abs(kendall_tau(a, b) - naive_tau_b(a.tolist(), b.tolist())) <= 1e-12


def test_tau_b_equals_tau_a_without_ties():
    rng = np.random.default_rng(6)
    for _ in range(50):
        n = int(rng.integers(2, 30))
        a, b = rng.permutation(n), rng.permutation(n)
        pairs = list(itertools.combinations(range(n), 2))
        s = sum(np.sign(a[i] - a[j]) * np.sign(b[i] - b[j]) for i, j in pairs)
        assert abs(kendall_tau(a, b) - s / len(pairs)) <= 1e-12


def test_tau_undefined():
    with pytest.raises(PreconditionError):
        kendall_tau([1], [1])
    with pytest.raises(PreconditionError):
        kendall_tau([1, 1, 1], [1, 2, 3])


def test_positions_requires_permutation():
    assert list(positions([2, 0, 1])) == [1, 2, 0]
    with pytest.raises(PreconditionError):
        positions([0, 0, 1])
