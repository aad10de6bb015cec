import numpy as np
import pytest
from hypothesis import strategies as st

from gtekit.graph_core import BipartiteGraph, GeneralGraph


@st.composite
def bipartite_graphs(draw, max_users=6, max_items=6, min_users=1, min_items=1):
    U = draw(st.integers(min_users, max_users))
    I = draw(st.integers(min_items, max_items))
    mask = draw(st.lists(st.booleans(), min_size=U * I, max_size=U * I))
    edges = [(k // I, k % I) for k, on in enumerate(mask) if on]
    return BipartiteGraph.from_edges(U, I, edges)


@st.composite
def general_graphs(draw, max_nodes=8, min_nodes=1):
    n = draw(st.integers(min_nodes, max_nodes))
    slots = [(a, b) for a in range(n) for b in range(a + 1, n)]
    mask = draw(st.lists(st.booleans(), min_size=len(slots), max_size=len(slots)))
    return GeneralGraph.from_edges(n, [e for e, on in zip(slots, mask) if on])


def random_bipartite(rng, max_users, max_items, p=None):
    U = int(rng.integers(1, max_users + 1))
    I = int(rng.integers(1, max_items + 1))
    p = rng.uniform(0.1, 0.7) if p is None else p
    return BipartiteGraph.from_edges(U, I, np.argwhere(rng.random((U, I)) < p))


@pytest.fixture
def small_graph():
    # u0-{i0,i1}, u1-{i1}
    return BipartiteGraph.from_edges(2, 2, [(0, 0), (0, 1), (1, 1)])


# acceptance criteria: one pass/fail line each in the terminal summary
_criteria = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    num, text = marker.args
    passed = call.excinfo is None
    prev = _criteria.get(num, (True, text))
    _criteria[num] = (prev[0] and passed, text)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria, key=int):
        ok, text = _criteria[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] AC{num}: {text}")
