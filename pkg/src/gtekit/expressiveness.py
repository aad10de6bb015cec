"""Machine checks for node- and graph-level expressiveness on small graphs.

Automorphic node pairs are found by backtracking search, classified by how
their neighborhoods relate, and compared against what message passing with
distinct initial colors can separate, with and without the node's own color
in the aggregation (the residual connection). Aggregation is made injective
by interning every distinct aggregation input as a fresh integer label.
"""

from __future__ import annotations

import enum
import itertools
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import networkx as nx

from .errors import PreconditionError
from .graph_core import GeneralGraph

MAX_AUTOMORPHISM_NODES = 10
MAX_BIPARTITE_SWEEP_NODES = 8


class PairType(enum.Enum):
    I = "I"      # identical neighborhoods
    II = "II"    # adjacent, identical apart from each other
    III = "III"  # neighborhoods differ beyond the pair itself

    def __str__(self):
        return self.value


class WLVerdict(enum.Enum):
    DISTINGUISHED = "distinguished"
    POSSIBLY_ISOMORPHIC = "possibly-isomorphic"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class AutomorphicPair:
    u: int
    v: int
    witness: tuple[int, ...]
    pair_type: PairType


@dataclass(frozen=True)
class ColorAssignment:
    round: int
    colors: tuple[int, ...]


class ColorInterner:
    """Injective map from aggregation inputs to consecutive integer labels."""

    def __init__(self):
        self._labels: dict = {}
        self._keys: list = []

    def __call__(self, key) -> int:
        label = self._labels.get(key)
        if label is None:
            label = self._labels[key] = len(self._keys)
            self._keys.append(key)
        return label

    def key_of(self, label: int):
        return self._keys[label]

    def __len__(self):
        return len(self._keys)

    def check_injective(self) -> None:
        if len(self._labels) != len(self._keys):
            raise AssertionError("interning table has colliding labels")
        for label, key in enumerate(self._keys):
            if self._labels[key] != label:
                raise AssertionError(f"label {label} does not round-trip through its key")


def classify_pair(g: GeneralGraph, u: int, v: int) -> PairType:
    nu, nv = set(g.neighbors(u)), set(g.neighbors(v))
    type1 = nu == nv
    type2 = v in nu and u in nv and nu - {v} == nv - {u}
    type3 = nu - {v} != nv - {u}
    if type1 + type2 + type3 != 1:
        raise AssertionError(f"pair ({u}, {v}) does not fall in exactly one type")
    return PairType.I if type1 else PairType.II if type2 else PairType.III


def is_automorphism(g: GeneralGraph, perm) -> bool:
    """True iff ``perm`` is a bijection on the nodes mapping edges onto edges."""
    n = g.num_nodes
    if len(perm) != n or sorted(perm) != list(range(n)):
        return False
    return all(g.has_edge(perm[a], perm[b]) for a, b in g.edges())


SELF_SLOT = "slot"    # (own color, neighbor multiset): classic 1-WL
SELF_MERGED = "merged"  # multiset of own and neighbor colors: residual aggregation
SELF_NONE = "none"    # neighbor multiset only


def refine_colors(graphs: Iterable[GeneralGraph], initial=None, self_mode: str = SELF_SLOT,
                  rounds: int | None = None) -> list[list[ColorAssignment]]:
    """Joint color refinement over several graphs sharing one interning table.

    Returns, per graph, the colors of rounds ``0..R``. With ``rounds=None`` the
    refinement stops once the joint partition no longer splits (only
    meaningful for the refining ``slot`` mode).
    """
    if self_mode not in (SELF_SLOT, SELF_MERGED, SELF_NONE):
        raise PreconditionError(f"unknown self_mode {self_mode!r}")
    graphs = list(graphs)
    intern = ColorInterner()
    if initial is None:
        current = [[intern(("init",)) for _ in range(g.num_nodes)] for g in graphs]
    else:
        current = [[intern(("init", c)) for c in cols] for cols in initial]
    traces = [[ColorAssignment(0, tuple(c))] for c in current]
    n_classes = len({c for cols in current for c in cols})
    r = 0
    while rounds is None or r < rounds:
        r += 1
        nxt = []
        for g, cols in zip(graphs, current):
            row = []
            for u in range(g.num_nodes):
                nbr = [cols[w] for w in g.adjacency[u]]
                if self_mode == SELF_MERGED:
                    key = (r, None, tuple(sorted(nbr + [cols[u]])))
                elif self_mode == SELF_SLOT:
                    key = (r, cols[u], tuple(sorted(nbr)))
                else:
                    key = (r, None, tuple(sorted(nbr)))
                row.append(intern(key))
            nxt.append(row)
        for trace, row in zip(traces, nxt):
            trace.append(ColorAssignment(r, tuple(row)))
        current = nxt
        if rounds is None:
            k = len({c for cols in current for c in cols})
            if k == n_classes:
                break
            n_classes = k
    intern.check_injective()
    return traces


def die_signatures(g: GeneralGraph, residual: bool, rounds: int) -> list[ColorAssignment]:
    """Colors for rounds ``0..rounds`` starting from one distinct color per node."""
    if rounds < 1:
        raise PreconditionError("rounds must be at least 1")
    mode = SELF_MERGED if residual else SELF_NONE
    return refine_colors([g], initial=[list(range(g.num_nodes))], self_mode=mode, rounds=rounds)[0]


def distinguished(trace: list[ColorAssignment], u: int, v: int) -> bool:
    """Different colors at every round after initialisation."""
    return all(c.colors[u] != c.colors[v] for c in trace[1:])


def _stable_classes(graphs) -> list[tuple[int, ...]]:
    # refine until stable; the last round carries the finest partition
    return [t[-1].colors for t in refine_colors(graphs)]


def _masks(g: GeneralGraph) -> list[int]:
    return [sum(1 << w for w in row) for row in g.adjacency]


def _search_order(g: GeneralGraph, start: int | None) -> list[int]:
    order, seen = [], set()
    roots = ([start] if start is not None else []) + sorted(range(g.num_nodes), key=lambda x: -g.degree(x))
    for root in roots:
        if root in seen:
            continue
        seen.add(root)
        queue = [root]
        while queue:
            x = queue.pop(0)
            order.append(x)
            for w in g.adjacency[x]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
    return order


def find_isomorphism(g1: GeneralGraph, g2: GeneralGraph, fixed: tuple[int, int] | None = None,
                     refine: bool = True, colors=None) -> tuple[int, ...] | None:
    """Some node bijection ``p`` with ``(a,b)`` an edge of g1 iff ``(p[a],p[b])`` is one of g2.

    ``fixed=(u, v)`` forces ``p[u] == v``. Candidates are pruned by degree, or
    by stable refined colors when ``refine`` is set.
    """
    n = g1.num_nodes
    if g2.num_nodes != n or g1.num_edges != g2.num_edges:
        return None
    if colors is not None:
        c1, c2 = colors
    elif refine:
        c1, c2 = _stable_classes([g1, g2])
    else:
        c1 = tuple(g1.degree(x) for x in range(n))
        c2 = tuple(g2.degree(x) for x in range(n))
    if sorted(c1) != sorted(c2):
        return None
    if fixed is not None and c1[fixed[0]] != c2[fixed[1]]:
        return None
    m1, m2 = _masks(g1), _masks(g2)
    order = _search_order(g1, fixed[0] if fixed else None)
    by_color: dict = {}
    for y in range(n):
        by_color.setdefault(c2[y], []).append(y)
    mapping = [-1] * n
    used = [False] * n
    placed: list[int] = []

    def extend(pos: int) -> bool:
        if pos == n:
            return True
        x = order[pos]
        if pos == 0 and fixed is not None:
            candidates = [fixed[1]]
        else:
            candidates = by_color[c1[x]]
        mx = m1[x]
        for y in candidates:
            if used[y]:
                continue
            my = m2[y]
            if any(((mx >> z) & 1) != ((my >> mapping[z]) & 1) for z in placed):
                continue
            mapping[x] = y
            used[y] = True
            placed.append(x)
            if extend(pos + 1):
                return True
            placed.pop()
            used[y] = False
            mapping[x] = -1
        return False

    return tuple(mapping) if extend(0) else None


def are_isomorphic(g1: GeneralGraph, g2: GeneralGraph) -> bool:
    """Exact isomorphism by degree-pruned backtracking (no color refinement)."""
    return find_isomorphism(g1, g2, refine=False) is not None


def _compose(p, q):
    # (p . q)[x] = p[q[x]]
    return tuple(p[x] for x in q)


def _inverse(p):
    inv = [0] * len(p)
    for x, y in enumerate(p):
        inv[y] = x
    return tuple(inv)


def automorphism_orbits(g: GeneralGraph) -> list[tuple[int, dict[int, tuple[int, ...]]]]:
    """Orbits as ``(representative, {member: automorphism mapping rep -> member})``."""
    n = g.num_nodes
    if n > MAX_AUTOMORPHISM_NODES:
        raise PreconditionError(f"automorphism search is capped at {MAX_AUTOMORPHISM_NODES} nodes, got {n}")
    colors = _stable_classes([g])[0]
    ident = tuple(range(n))
    assigned = [False] * n
    orbits = []
    for r in range(n):
        if assigned[r]:
            continue
        assigned[r] = True
        members = {r: ident}
        for w in range(r + 1, n):
            if assigned[w] or colors[w] != colors[r]:
                continue
            p = find_isomorphism(g, g, fixed=(r, w), colors=(colors, colors))
            if p is not None:
                members[w] = p
                assigned[w] = True
        orbits.append((r, members))
    return orbits


def find_automorphic_pairs(g: GeneralGraph) -> list[AutomorphicPair]:
    """Every unordered pair ``u < v`` sharing an orbit, with a witness and its type."""
    pairs = []
    for _, members in automorphism_orbits(g):
        for a, b in itertools.combinations(sorted(members), 2):
            witness = _compose(members[b], _inverse(members[a]))
            pairs.append(AutomorphicPair(a, b, witness, classify_pair(g, a, b)))
    pairs.sort(key=lambda p: (p.u, p.v))
    return pairs


# which pair types each variant separates in every round
PREDICTED_DISTINGUISHED = {
    True: {PairType.I: True, PairType.II: False, PairType.III: True},
    False: {PairType.I: False, PairType.II: True, PairType.III: True},
}


@dataclass
class CheckReport:
    name: str
    graphs: int = 0
    pairs: int = 0
    type_counts: Counter = field(default_factory=Counter)
    violations: list = field(default_factory=list)
    unit: str = "automorphic pairs"

    @property
    def ok(self) -> bool:
        return not self.violations

    def merge(self, other: "CheckReport") -> None:
        self.graphs += other.graphs
        self.pairs += other.pairs
        self.type_counts.update(other.type_counts)
        self.violations.extend(other.violations)

    def summary(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        text = f"{self.name}: {status} - {len(self.violations)} violations over {self.graphs} graphs, {self.pairs} {self.unit}"
        if self.unit == "automorphic pairs":
            text += " (" + ", ".join(f"Type {t}: {self.type_counts.get(t, 0)}" for t in PairType) + ")"
        return text


def _default_rounds(g: GeneralGraph, rounds):
    return max(g.num_nodes, 1) if rounds is None else rounds


def check_residual_separation(g: GeneralGraph, rounds: int | None = None, pairs=None) -> CheckReport:
    """Compare observed separation of automorphic pairs with the prediction table."""
    rounds = _default_rounds(g, rounds)
    pairs = find_automorphic_pairs(g) if pairs is None else pairs
    report = CheckReport("residual vs. non-residual separation", graphs=1, pairs=len(pairs))
    if not pairs:
        return report
    traces = {res: die_signatures(g, res, rounds) for res in (True, False)}
    for p in pairs:
        report.type_counts[p.pair_type] += 1
        for res, trace in traces.items():
            seen = distinguished(trace, p.u, p.v)
            if seen != PREDICTED_DISTINGUISHED[res][p.pair_type]:
                report.violations.append({
                    "graph": g.edges(), "u": p.u, "v": p.v, "type": str(p.pair_type),
                    "residual": res, "observed": seen,
                })
    return report


def _require_connected_bipartite(g: GeneralGraph) -> None:
    if g.num_nodes <= 2:
        raise PreconditionError("graph must have more than 2 nodes")
    if not g.is_connected():
        raise PreconditionError("graph must be connected")
    if g.bipartition() is None:
        raise PreconditionError("graph must be bipartite")


def check_no_type2(g: GeneralGraph, pairs=None) -> CheckReport:
    """No automorphic pair of a connected bipartite graph (n > 2) is of Type II."""
    _require_connected_bipartite(g)
    pairs = find_automorphic_pairs(g) if pairs is None else pairs
    report = CheckReport("no Type II pairs on bipartite graphs", graphs=1, pairs=len(pairs))
    for p in pairs:
        report.type_counts[p.pair_type] += 1
        if p.pair_type is PairType.II:
            report.violations.append({"graph": g.edges(), "u": p.u, "v": p.v})
    return report


def check_bipartite_separation(g: GeneralGraph, rounds: int | None = None, pairs=None) -> CheckReport:
    """Residual refinement from distinct colors separates every automorphic pair."""
    _require_connected_bipartite(g)
    rounds = _default_rounds(g, rounds)
    pairs = find_automorphic_pairs(g) if pairs is None else pairs
    report = CheckReport("residual separation on bipartite graphs", graphs=1, pairs=len(pairs))
    if not pairs:
        return report
    trace = die_signatures(g, True, rounds)
    for p in pairs:
        report.type_counts[p.pair_type] += 1
        if not distinguished(trace, p.u, p.v):
            report.violations.append({"graph": g.edges(), "u": p.u, "v": p.v, "type": str(p.pair_type)})
    return report


def connected_bipartite_graphs(n_max: int, n_min: int = 3) -> Iterator[GeneralGraph]:
    """All connected bipartite graphs on ``n_min..n_max`` nodes, by raw edge subsets.

    Side sizes ``a <= b`` with nodes ``0..a-1`` on one side. No isomorphism
    reduction beyond skipping the mirrored ``(b, a)`` split.
    """
    if n_max > MAX_BIPARTITE_SWEEP_NODES:
        raise PreconditionError(f"exhaustive sweep is capped at {MAX_BIPARTITE_SWEEP_NODES} nodes")
    for n in range(max(n_min, 2), n_max + 1):
        for a in range(1, n // 2 + 1):
            b = n - a
            full_row = (1 << b) - 1
            slots = [(i, a + j) for i in range(a) for j in range(b)]
            for mask in range(1 << (a * b)):
                rows = [(mask >> (i * b)) & full_row for i in range(a)]
                if not all(rows):
                    continue
                cols = 0
                for r in rows:
                    cols |= r
                if cols != full_row:
                    continue
                edges = [slots[k] for k in range(a * b) if (mask >> k) & 1]
                g = GeneralGraph.from_edges(n, edges)
                if g.is_connected():
                    yield g


def connected_graphs(n_max: int, n_min: int = 1) -> Iterator[GeneralGraph]:
    """Every connected graph on ``n_min..n_max`` nodes up to isomorphism (``n_max <= 7``)."""
    if n_max > 7:
        raise PreconditionError("the graph atlas covers at most 7 nodes")
    for nxg in nx.graph_atlas_g():
        n = nxg.number_of_nodes()
        if n_min <= n <= n_max and n > 0 and nx.is_connected(nxg):
            yield GeneralGraph.from_networkx(nxg)


def sweep_residual_separation(n_max: int = 7, rounds: int | None = None) -> CheckReport:
    total = CheckReport("residual vs. non-residual separation")
    for g in connected_graphs(n_max, n_min=2):
        pairs = find_automorphic_pairs(g)
        if pairs:
            total.merge(check_residual_separation(g, rounds, pairs))
    return total


def sweep_bipartite(n_max: int = MAX_BIPARTITE_SWEEP_NODES, rounds: int | None = None) -> tuple[CheckReport, CheckReport]:
    """One pass over the connected bipartite sweep feeding both bipartite checks."""
    lemma = CheckReport("no Type II pairs on bipartite graphs")
    thm = CheckReport("residual separation on bipartite graphs")
    for g in connected_bipartite_graphs(n_max):
        pairs = find_automorphic_pairs(g)
        lemma.merge(check_no_type2(g, pairs))
        thm.merge(check_bipartite_separation(g, rounds, pairs))
    return lemma, thm


def check_no_type2_exhaustive(n_max: int = MAX_BIPARTITE_SWEEP_NODES) -> CheckReport:
    return sweep_bipartite(n_max)[0]


def check_bipartite_separation_exhaustive(n_max: int = MAX_BIPARTITE_SWEEP_NODES, rounds: int | None = None) -> CheckReport:
    return sweep_bipartite(n_max, rounds)[1]


def wl_isomorphism_test(g1: GeneralGraph, g2: GeneralGraph, rounds: int | None = None) -> WLVerdict:
    """Classic 1-WL from uniform colors; compares color histograms every round."""
    if g1.num_nodes != g2.num_nodes:
        return WLVerdict.DISTINGUISHED
    if rounds is None:
        rounds = max(g1.num_nodes, 1)
    t1, t2 = refine_colors([g1, g2], rounds=rounds)
    for a, b in zip(t1, t2):
        if Counter(a.colors) != Counter(b.colors):
            return WLVerdict.DISTINGUISHED
    return WLVerdict.POSSIBLY_ISOMORPHIC


def relabel(g: GeneralGraph, perm) -> GeneralGraph:
    return GeneralGraph.from_edges(g.num_nodes, ((perm[a], perm[b]) for a, b in g.edges()))


def sweep_wl(n_max: int = 6, seed: int = 0) -> CheckReport:
    """1-WL never separates a graph from a shuffled copy of itself.

    ``pairs`` counts the non-isomorphic connected graphs of equal node and
    edge count that 1-WL leaves unseparated (its known blind spots).
    """
    import random

    rng = random.Random(seed)
    report = CheckReport("1-WL soundness", unit="non-isomorphic pairs left unseparated")
    graphs = list(connected_graphs(n_max))
    for g in graphs:
        report.graphs += 1
        perm = list(range(g.num_nodes))
        rng.shuffle(perm)
        if wl_isomorphism_test(g, relabel(g, perm)) is not WLVerdict.POSSIBLY_ISOMORPHIC:
            report.violations.append({"graph": g.edges(), "perm": perm})
    for g1, g2 in itertools.combinations(graphs, 2):
        if g1.num_nodes == g2.num_nodes and g1.num_edges == g2.num_edges:
            if wl_isomorphism_test(g1, g2) is WLVerdict.POSSIBLY_ISOMORPHIC:
                report.pairs += 1
    return report
