import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gtekit.errors import MemoryBudgetError, PreconditionError, WalkCountOverflowError
from gtekit.graph_core import BipartiteGraph
from gtekit.gte import (gte_full, gte_score_user, gte_score_users, recommend, top_n, top_n_rows,
                        ScoreVector)
from gtekit.tc_oracle import tc_matrix_power

from .conftest import bipartite_graphs


def test_two_layer_hand_values(small_graph):
    assert gte_full(small_graph, 2).tolist() == [[2, 2], [0, 2]]
    assert gte_score_users(small_graph, [0, 1], 2).tolist() == [[2, 2], [0, 2]]


def test_layer_zero_is_zero(small_graph):
    assert not gte_full(small_graph, 0).any()
    assert not gte_score_users(small_graph, [0, 1], 0).any()


def test_isolated_user_scores_zero():
    g = BipartiteGraph.from_edges(2, 3, [(0, 0), (0, 1)])
    assert not gte_score_user(g, 1, 3).scores.any()


def test_scores_are_integers(small_graph):
    assert gte_full(small_graph).dtype == np.int64
    assert gte_score_users(small_graph, [1]).dtype == np.int64


@settings(max_examples=80, deadline=None)
@given(bipartite_graphs(max_users=6, max_items=6), st.integers(0, 5))
def test_scores_equal_walk_counts(g, layers):
    tc = tc_matrix_power(g, layers).entries[: g.num_users, g.num_users:]
    assert np.array_equal(gte_full(g, layers), tc)
    assert np.array_equal(gte_score_users(g, np.arange(g.num_users), layers), tc)


@settings(max_examples=60, deadline=None)
@given(bipartite_graphs(max_users=6, max_items=6), st.integers(1, 4))
def test_closer_items_score_higher(g, layers):
    tc = tc_matrix_power(g, layers).entries[: g.num_users, g.num_users:]
    scores = gte_full(g, layers)
    for u in range(g.num_users):
        more = tc[u][:, None] > tc[u][None, :]
        assert np.all(scores[u][:, None] > scores[u][None, :], where=more)


def test_batched_matches_full_on_larger_graphs():
    rng = np.random.default_rng(5)
    for p in (0.01, 0.05, 0.3):
        g = BipartiteGraph.from_edges(120, 90, np.argwhere(rng.random((120, 90)) < p))
        full = gte_full(g, 3)
        users = rng.permutation(120)[:50]
        assert np.array_equal(gte_score_users(g, users, 3), full[users])


def test_memory_budget():
    g = BipartiteGraph.from_edges(100, 100, [(0, 0)])
    with pytest.raises(MemoryBudgetError):
        gte_full(g, 3, memory_budget=1024)


def test_overflow_detected():
    n = 40
    g = BipartiteGraph.from_edges(n, n, [(u, i) for u in range(n) for i in range(n)])
    with pytest.raises(WalkCountOverflowError):
        gte_full(g, 30)
    with pytest.raises(WalkCountOverflowError):
        gte_score_users(g, [0], 30)


def test_bad_arguments(small_graph):
    with pytest.raises(PreconditionError):
        gte_full(small_graph, -1)
    with pytest.raises(PreconditionError):
        gte_score_users(small_graph, [5])


def test_top_n_ties_and_exclusion():
    s = ScoreVector(0, np.array([3, 5, 5, 1, 0]), 3)
    assert list(top_n(s, 3).items) == [1, 2, 0]
    assert list(top_n(s, 10, exclude=[1]).items) == [2, 0, 3, 4]
    assert list(top_n(s, 2, exclude=[0, 1, 2, 3, 4]).items) == []


def test_top_n_rows_matches_single():
    rng = np.random.default_rng(3)
    scores = rng.integers(0, 4, size=(7, 12))
    excludes = [rng.choice(12, size=int(rng.integers(0, 5)), replace=False) for _ in range(7)]
    rows = top_n_rows(scores, 6, excludes)
    for r in range(7):
        single = top_n(ScoreVector(r, scores[r], 3), 6, excludes[r])
        assert list(rows[r]) == list(single.items)


def test_recommend_excludes_train(small_graph):
    out = {r.user: list(r.items) for r in recommend(small_graph, 3, n=5)}
    assert out == {0: [], 1: [0]}
    out = {r.user: list(r.items) for r in recommend(small_graph, 3, n=5, exclude_train=False)}
    assert out[0][0] in (0, 1) and sorted(out[0]) == [0, 1]
