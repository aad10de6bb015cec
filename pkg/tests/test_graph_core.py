import os

import numpy as np
import pytest
from hypothesis import given, settings

from gtekit.errors import DataError, GraphFormatError, PreconditionError, SplitOverlapError
from gtekit.graph_core import (BipartiteGraph, GeneralGraph, largest_connected_component, load_interactions,
                               load_split, read_interchange, write_interchange)

from .conftest import bipartite_graphs


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_counts(tmp_path):
    g, ids = load_interactions(write(tmp_path, "f.txt", "a x\na y\nb y\n"))
    assert (g.num_users, g.num_items, g.num_edges) == (2, 2, 3)
    assert ids.user_ids == ["a", "b"] and ids.item_ids == ["x", "y"]


def test_duplicates_collapse(tmp_path):
    g, _ = load_interactions(write(tmp_path, "f.txt", "a x\na x\n"))
    assert (g.num_users, g.num_items, g.num_edges) == (1, 1, 1)


def test_separators_comments_and_extra_columns(tmp_path):
    text = "# header\na,x,5,1700000000\n\nb\ty 3\n  c  ,  x\n"
    g, ids = load_interactions(write(tmp_path, "f.csv", text))
    assert ids.user_ids == ["a", "b", "c"]
    assert ids.item_ids == ["x", "y"]
    assert g.num_edges == 3


def test_malformed_line_reports_line_number(tmp_path):
    with pytest.raises(GraphFormatError) as err:
        load_interactions(write(tmp_path, "f.txt", "a x\n# c\nlonely\n"))
    assert err.value.line == 3


@pytest.mark.parametrize("text", ["", "# only comments\n\n"])
def test_empty_file_rejected(tmp_path, text):
    with pytest.raises(GraphFormatError):
        load_interactions(write(tmp_path, "f.txt", text))


def test_missing_file(tmp_path):
    with pytest.raises(GraphFormatError):
        load_interactions(tmp_path / "nope.txt")


def test_load_is_deterministic(tmp_path):
    p = write(tmp_path, "f.txt", "z 9\ny 8\nz 7\nx 9\n")
    (g1, ids1), (g2, ids2) = load_interactions(p), load_interactions(p)
    assert g1 == g2
    assert ids1.user_ids == ids2.user_ids == ["z", "y", "x"]
    assert np.array_equal(g1.user_indices, g2.user_indices)


def test_split_valid(tmp_path):
    s = load_split(write(tmp_path, "tr", "a x\n"), write(tmp_path, "te", "a y\n"))
    assert s.train.num_edges == 1
    assert [s.ids.item_ids[i] for i in s.test_positives[0]] == ["y"]
    assert s.num_items == 2


def test_split_overlap_rejected(tmp_path):
    with pytest.raises(SplitOverlapError) as err:
        load_split(write(tmp_path, "tr", "a x\n"), write(tmp_path, "te", "a x\n"))
    assert err.value.pairs == [("a", "x")]


def test_split_user_without_test(tmp_path):
    s = load_split(write(tmp_path, "tr", "a x\nc x\n"), write(tmp_path, "te", "a y\n"))
    c = s.ids.user_index["c"]
    assert len(s.test_positives[c]) == 0
    assert list(s.users_with_test()) == [s.ids.user_index["a"]]


def test_lcc_tie_goes_to_lowest_node():
    g = BipartiteGraph.from_edges(2, 2, [(0, 0), (1, 1)])
    sub, ids = largest_connected_component(g)
    assert (sub.num_users, sub.num_items, sub.num_edges) == (1, 1, 1)
    assert ids.user_ids == [0] and ids.item_ids == [0]


def test_lcc_connected_is_identity(small_graph):
    sub, _ = largest_connected_component(small_graph)
    assert sub == small_graph


def test_lcc_path_plus_isolated_edge():
    # u0 - i0 - u1 and u2 - i1
    g = BipartiteGraph.from_edges(3, 2, [(0, 0), (1, 0), (2, 1)])
    sub, ids = largest_connected_component(g)
    assert sub.num_nodes == 3
    assert ids.user_ids == [0, 1] and ids.item_ids == [0]


def test_lcc_keeps_raw_ids(tmp_path):
    g, ids = load_interactions(write(tmp_path, "f", "p q\nr s\nr t\n"))
    sub, sub_ids = largest_connected_component(g, ids)
    assert sub_ids.user_ids == ["r"] and sub_ids.item_ids == ["s", "t"]


def test_lcc_empty_graph():
    with pytest.raises(PreconditionError):
        largest_connected_component(BipartiteGraph.from_edges(0, 0, []))


def test_out_of_range_edges():
    with pytest.raises(DataError):
        BipartiteGraph.from_edges(1, 1, [(0, 1)])
    with pytest.raises(DataError):
        BipartiteGraph.from_edges(1, 1, [(-1, 0)])


def test_zero_degree_nodes_retained():
    g = BipartiteGraph.from_edges(3, 4, [(0, 0)])
    assert (g.num_users, g.num_items) == (3, 4)
    assert list(g.user_degrees()) == [1, 0, 0]


def test_general_graph_rejects_self_edges():
    with pytest.raises(DataError):
        GeneralGraph.from_edges(2, [(0, 0)])


def test_general_graph_helpers():
    g = GeneralGraph.from_edges(4, [(0, 1), (1, 2)])
    assert not g.is_connected()
    assert g.bipartition() is not None
    tri = GeneralGraph.from_edges(3, [(0, 1), (1, 2), (2, 0)])
    assert tri.is_connected() and tri.bipartition() is None


@given(bipartite_graphs(max_users=8, max_items=8))
def test_transpose_consistency(g):
    assert g.user_degrees().sum() == g.item_degrees().sum() == g.num_edges
    fwd = {(int(u), int(i)) for u, i in g.edges()}
    bwd = {(int(u), i) for i in range(g.num_items) for u in g.users_of(i)}
    assert fwd == bwd
    assert (g.forward.T != g.backward).nnz == 0


@settings(max_examples=50)
@given(bipartite_graphs(max_users=8, max_items=8))
def test_interchange_round_trip(tmp_path_factory, g):
    p = tmp_path_factory.mktemp("ic") / "g.txt"
    write_interchange(g, p)
    first = p.read_bytes()
    h = read_interchange(p)
    assert h == g
    write_interchange(h, p)
    assert p.read_bytes() == first


def test_interchange_format(tmp_path, small_graph):
    p = tmp_path / "g.txt"
    write_interchange(small_graph, p)
    assert p.read_text() == "2 2 3\n0 0\n0 1\n1 1\n"


def test_interchange_header_mismatch(tmp_path):
    p = write(tmp_path, "g", "1 1 2\n0 0\n")
    with pytest.raises(GraphFormatError):
        read_interchange(p)


@pytest.mark.skipif("GOWALLA_TRAIN" not in os.environ, reason="set GOWALLA_TRAIN to the full Gowalla dump")
def test_gowalla_counts():
    g, _ = load_interactions(os.environ["GOWALLA_TRAIN"])
    assert (g.num_users, g.num_items, g.num_edges) == (50_821, 57_440, 1_172_425)
