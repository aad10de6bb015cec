import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gtekit.errors import NonFiniteError, PreconditionError
from gtekit.graph_core import BipartiteGraph
from gtekit.gte import gte_full
from gtekit.paradigm import (Counterexample, EmbeddingSet, SearchParams, kendall_vs_ideal, replay,
                             sample_trial, score_gap_terms, search_tc_violation, simplified_propagate,
                             verify_walk_expansion, walk_weighted_embeddings)

from .conftest import bipartite_graphs, random_bipartite

GOLDEN = Path(__file__).parent / "data" / "tc_violation.json"


def test_embedding_scale():
    e = EmbeddingSet.random(20000, 16, 0)
    assert e.dim == 16
    assert math.isclose(e.vectors.std(), 1 / 4, rel_tol=0.02)
    assert np.array_equal(e.vectors, EmbeddingSet.random(20000, 16, 0).vectors)


def test_propagate_zero_layers(small_graph):
    e = EmbeddingSet.random(4, 3, 1)
    res = simplified_propagate(small_graph, e, 0)
    assert np.array_equal(res.embeddings, e.vectors)


def test_propagate_one_layer_by_hand(small_graph):
    x = np.arange(8, dtype=np.int64).reshape(4, 2)
    res = simplified_propagate(small_graph, EmbeddingSet(x), 1)
    # u0 <- u0 + i0 + i1, u1 <- u1 + i1, i0 <- i0 + u0, i1 <- i1 + u0 + u1
    expect = [x[0] + x[2] + x[3], x[1] + x[3], x[2] + x[0], x[3] + x[0] + x[1]]
    assert res.embeddings.tolist() == np.array(expect).tolist()


def test_wrong_shape(small_graph):
    with pytest.raises(PreconditionError):
        simplified_propagate(small_graph, EmbeddingSet(np.zeros((3, 2))), 1)


def test_non_finite_reports_layer(small_graph):
    e = EmbeddingSet(np.full((4, 1), 1e308))
    with pytest.raises(NonFiniteError, match="layer 1"):
        simplified_propagate(small_graph, e, 2)


@settings(max_examples=50, deadline=None)
@given(bipartite_graphs(max_users=6, max_items=6), st.integers(0, 4), st.integers(0, 2**31))
def test_integer_embeddings_exact(g, layers, seed):
    x = np.random.default_rng(seed).integers(-5, 6, size=(g.num_nodes, 4))
    e = EmbeddingSet(x)
    assert np.array_equal(simplified_propagate(g, e, layers).embeddings, walk_weighted_embeddings(g, e, layers))
    assert verify_walk_expansion(g, e, layers).max_abs_deviation == 0


@settings(max_examples=50, deadline=None)
@given(bipartite_graphs(max_users=6, max_items=6), st.integers(0, 4), st.integers(0, 2**31))
def test_float_embeddings_close(g, layers, seed):
    rep = verify_walk_expansion(g, EmbeddingSet.random(g.num_nodes, 8, seed), layers)
    assert rep.ok, rep


def test_gap_terms_sum_to_score_gap():
    rng = np.random.default_rng(11)
    for trial in range(30):
        g = random_bipartite(rng, 6, 6)
        if g.num_items < 2:
            continue
        e = EmbeddingSet.random(g.num_nodes, 8, trial)
        scores = simplified_propagate(g, e, 3).scores
        for u in range(g.num_users):
            t = score_gap_terms(g, e, 3, u, 0, 1)
            assert math.isclose(t["gap"], scores[u, 0] - scores[u, 1], rel_tol=1e-9, abs_tol=1e-9)


def test_sample_trial_is_pure():
    p = SearchParams()
    g1, e1 = sample_trial(p, 7, 3)
    g2, e2 = sample_trial(p, 7, 3)
    assert g1 == g2 and np.array_equal(e1.vectors, e2.vectors)


def test_golden_counterexample():
    ce = Counterexample.from_dict(json.loads(GOLDEN.read_text()))
    found = search_tc_violation(trials=ce.trial + 1)
    assert found.counterexample.to_dict() == ce.to_dict()
    tc1, tc2, s1, s2 = replay(ce)
    assert (tc1, tc2) == (ce.tc1, ce.tc2) and tc1 > tc2
    assert s1 <= s2
    assert math.isclose(s1, ce.score1, rel_tol=1e-12) and math.isclose(s2, ce.score2, rel_tol=1e-12)


def test_gte_scorer_never_violates():
    assert not search_tc_violation(trials=300, scorer="gte").found


def test_search_rejects_bad_scorer():
    with pytest.raises(PreconditionError):
        search_tc_violation(trials=1, scorer="bogus")


def test_kendall_ideal_scores_are_perfect():
    rng = np.random.default_rng(2)
    g = random_bipartite(rng, 20, 20, p=0.2)
    summary = kendall_vs_ideal(g, gte_full(g, 3), 3)
    assert summary.evaluated > 0
    assert np.allclose(summary.per_user[~np.isnan(summary.per_user)], 1.0)
    assert summary.evaluated + summary.skipped == g.num_users


def test_kendall_skips_undefined_users():
    g = BipartiteGraph.from_edges(2, 3, [(0, 0), (0, 1)])
    summary = kendall_vs_ideal(g, gte_full(g, 3), 3)
    assert summary.skipped == 1 and np.isnan(summary.per_user[1])
