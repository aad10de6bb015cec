"""Bipartite interaction graphs, small general graphs, and their loaders.

Node numbering convention used across the package when a bipartite graph is
viewed as a plain graph: users occupy ``0 .. U-1`` and items ``U .. U+I-1``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import DataError, GraphFormatError, PreconditionError, SplitOverlapError

_SEPARATORS = {
    "auto": re.compile(r"[\s,]+"),
    "whitespace": re.compile(r"\s+"),
    "comma": re.compile(r"\s*,\s*"),
    "tab": re.compile(r"\t"),
}


def _csr_from_pairs(rows: np.ndarray, cols: np.ndarray, n_rows: int) -> tuple[np.ndarray, np.ndarray]:
    # pairs must already be unique
    order = np.lexsort((cols, rows))
    indices = cols[order].astype(np.int64)
    counts = np.bincount(rows, minlength=n_rows)
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, indices


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    """Immutable user-item adjacency held in both directions as CSR arrays."""

    num_users: int
    num_items: int
    user_indptr: np.ndarray
    user_indices: np.ndarray
    item_indptr: np.ndarray
    item_indices: np.ndarray

    @classmethod
    def from_edges(cls, num_users: int, num_items: int, edges) -> "BipartiteGraph":
        """Build from an iterable or ``(E, 2)`` array of ``(user, item)`` pairs; duplicates collapse."""
        arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
        if arr.size == 0:
            arr = arr.reshape(0, 2)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise DataError("edges must be (user, item) pairs")
        if num_users < 0 or num_items < 0:
            raise DataError("node counts must be non-negative")
        if len(arr):
            if arr[:, 0].min() < 0 or arr[:, 0].max() >= num_users:
                raise DataError("user index out of range")
            if arr[:, 1].min() < 0 or arr[:, 1].max() >= num_items:
                raise DataError("item index out of range")
            keys = np.unique(arr[:, 0] * max(num_items, 1) + arr[:, 1])
            users, items = np.divmod(keys, max(num_items, 1))
        else:
            users = items = np.zeros(0, dtype=np.int64)
        uptr, uidx = _csr_from_pairs(users, items, num_users)
        iptr, iidx = _csr_from_pairs(items, users, num_items)
        g = cls(int(num_users), int(num_items), uptr, uidx, iptr, iidx)
        g.check()
        return g

    @property
    def num_edges(self) -> int:
        return int(self.user_indices.shape[0])

    @property
    def num_nodes(self) -> int:
        return self.num_users + self.num_items

    def items_of(self, user: int) -> np.ndarray:
        return self.user_indices[self.user_indptr[user]:self.user_indptr[user + 1]]

    def users_of(self, item: int) -> np.ndarray:
        return self.item_indices[self.item_indptr[item]:self.item_indptr[item + 1]]

    def user_degrees(self) -> np.ndarray:
        return np.diff(self.user_indptr)

    def item_degrees(self) -> np.ndarray:
        return np.diff(self.item_indptr)

    def edges(self) -> np.ndarray:
        """All edges as an ``(E, 2)`` array in ascending ``(user, item)`` order."""
        users = np.repeat(np.arange(self.num_users, dtype=np.int64), self.user_degrees())
        return np.column_stack([users, self.user_indices])

    def item_node(self, item: int) -> int:
        return self.num_users + int(item)

    @cached_property
    def forward(self) -> sp.csr_matrix:
        """``U x I`` int64 sparse adjacency."""
        data = np.ones(self.num_edges, dtype=np.int64)
        m = sp.csr_matrix((data, self.user_indices, self.user_indptr), shape=(self.num_users, self.num_items))
        return m

    @cached_property
    def backward(self) -> sp.csr_matrix:
        """``I x U`` int64 sparse adjacency (the transpose of :attr:`forward`)."""
        data = np.ones(self.num_edges, dtype=np.int64)
        return sp.csr_matrix((data, self.item_indices, self.item_indptr), shape=(self.num_items, self.num_users))

    def check(self) -> None:
        """Verify structural invariants; raises :class:`DataError` on any breach."""
        for indptr, indices, n_rows, n_cols, name in (
            (self.user_indptr, self.user_indices, self.num_users, self.num_items, "forward"),
            (self.item_indptr, self.item_indices, self.num_items, self.num_users, "backward"),
        ):
            if indptr.shape != (n_rows + 1,) or indptr[0] != 0 or indptr[-1] != indices.shape[0]:
                raise DataError(f"{name} adjacency has a malformed row pointer")
            if np.any(np.diff(indptr) < 0):
                raise DataError(f"{name} adjacency has a decreasing row pointer")
            if indices.size:
                if indices.min() < 0 or indices.max() >= n_cols:
                    raise DataError(f"{name} adjacency references an out-of-range node")
                # strictly increasing inside every row
                step = np.diff(indices)
                row_start = np.zeros(indices.shape[0], dtype=bool)
                row_start[indptr[:-1][np.diff(indptr) > 0]] = True
                if np.any(step[~row_start[1:]] <= 0):
                    raise DataError(f"{name} adjacency rows are not strictly sorted")
        if self.user_indices.shape[0] != self.item_indices.shape[0]:
            raise DataError("forward and backward edge counts differ")
        fwd = self.edges()
        items = np.repeat(np.arange(self.num_items, dtype=np.int64), self.item_degrees())
        bwd = np.column_stack([self.item_indices, items])
        bwd = bwd[np.lexsort((bwd[:, 1], bwd[:, 0]))]
        if not np.array_equal(fwd, bwd):
            raise DataError("forward and backward adjacency are not transposes")
        _freeze(self.user_indptr, self.user_indices, self.item_indptr, self.item_indices)

    def to_general(self) -> "GeneralGraph":
        e = self.edges()
        return GeneralGraph.from_edges(self.num_nodes, [(int(u), self.num_users + int(i)) for u, i in e])

    def __eq__(self, other):
        if not isinstance(other, BipartiteGraph):
            return NotImplemented
        return (
            self.num_users == other.num_users
            and self.num_items == other.num_items
            and np.array_equal(self.user_indptr, other.user_indptr)
            and np.array_equal(self.user_indices, other.user_indices)
        )

    def __repr__(self):
        return f"BipartiteGraph(U={self.num_users}, I={self.num_items}, E={self.num_edges})"


@dataclass(frozen=True)
class GeneralGraph:
    """Small undirected simple graph with sorted neighbor tuples."""

    num_nodes: int
    adjacency: tuple[tuple[int, ...], ...]

    @classmethod
    def from_edges(cls, num_nodes: int, edges: Iterable[tuple[int, int]]) -> "GeneralGraph":
        nbrs: list[set[int]] = [set() for _ in range(num_nodes)]
        for a, b in edges:
            a, b = int(a), int(b)
            if not (0 <= a < num_nodes and 0 <= b < num_nodes):
                raise DataError(f"edge ({a}, {b}) out of range for {num_nodes} nodes")
            if a == b:
                raise DataError(f"self-edge at node {a}")
            nbrs[a].add(b)
            nbrs[b].add(a)
        return cls(num_nodes, tuple(tuple(sorted(s)) for s in nbrs))

    @classmethod
    def from_networkx(cls, nxg) -> "GeneralGraph":
        nodes = sorted(nxg.nodes())
        pos = {v: k for k, v in enumerate(nodes)}
        return cls.from_edges(len(nodes), ((pos[a], pos[b]) for a, b in nxg.edges()))

    def __post_init__(self):
        for u, row in enumerate(self.adjacency):
            for v in row:
                if v == u or u not in self.adjacency[v]:
                    raise DataError(f"adjacency is not symmetric/simple at ({u}, {v})")

    def neighbors(self, u: int) -> tuple[int, ...]:
        return self.adjacency[u]

    def degree(self, u: int) -> int:
        return len(self.adjacency[u])

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adjacency[u]

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.num_nodes) for v in self.adjacency[u] if u < v]

    @property
    def num_edges(self) -> int:
        return sum(len(r) for r in self.adjacency) // 2

    def is_connected(self) -> bool:
        if self.num_nodes == 0:
            return True
        seen = {0}
        stack = [0]
        while stack:
            for w in self.adjacency[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.num_nodes

    def bipartition(self) -> list[int] | None:
        """Side label (0/1) per node, or ``None`` when the graph has an odd cycle."""
        side = [-1] * self.num_nodes
        for s in range(self.num_nodes):
            if side[s] >= 0:
                continue
            side[s] = 0
            stack = [s]
            while stack:
                u = stack.pop()
                for w in self.adjacency[u]:
                    if side[w] < 0:
                        side[w] = 1 - side[u]
                        stack.append(w)
                    elif side[w] == side[u]:
                        return None
        return side

    def to_scipy(self) -> sp.csr_matrix:
        rows = np.repeat(np.arange(self.num_nodes), [len(r) for r in self.adjacency])
        cols = np.fromiter((v for r in self.adjacency for v in r), dtype=np.int64, count=len(rows))
        data = np.ones(len(rows), dtype=np.int64)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.num_nodes, self.num_nodes))


def as_general(g) -> GeneralGraph:
    if isinstance(g, GeneralGraph):
        return g
    if isinstance(g, BipartiteGraph):
        return g.to_general()
    raise TypeError(f"expected GeneralGraph or BipartiteGraph, got {type(g).__name__}")


@dataclass
class IdMaps:
    """Raw ID <-> contiguous index maps for users and items."""

    user_ids: list = field(default_factory=list)
    item_ids: list = field(default_factory=list)
    user_index: dict = field(default_factory=dict)
    item_index: dict = field(default_factory=dict)

    def add_user(self, raw: Hashable) -> int:
        idx = self.user_index.get(raw)
        if idx is None:
            idx = self.user_index[raw] = len(self.user_ids)
            self.user_ids.append(raw)
        return idx

    def add_item(self, raw: Hashable) -> int:
        idx = self.item_index.get(raw)
        if idx is None:
            idx = self.item_index[raw] = len(self.item_ids)
            self.item_ids.append(raw)
        return idx

    @classmethod
    def identity(cls, num_users: int, num_items: int) -> "IdMaps":
        m = cls()
        for u in range(num_users):
            m.add_user(u)
        for i in range(num_items):
            m.add_item(i)
        return m

    @property
    def num_users(self) -> int:
        return len(self.user_ids)

    @property
    def num_items(self) -> int:
        return len(self.item_ids)


@dataclass(frozen=True)
class DatasetSplit:
    train: BipartiteGraph
    test_positives: tuple[np.ndarray, ...]
    ids: IdMaps

    @property
    def num_users(self) -> int:
        return self.train.num_users

    @property
    def num_items(self) -> int:
        return self.train.num_items

    def users_with_test(self) -> np.ndarray:
        return np.array([u for u, t in enumerate(self.test_positives) if len(t)], dtype=np.int64)


def _read_pairs(path, sep: str = "auto") -> list[tuple[str, str, int]]:
    try:
        splitter = _SEPARATORS[sep]
    except KeyError:
        raise PreconditionError(f"unknown separator {sep!r}; choose from {sorted(_SEPARATORS)}") from None
    path = Path(path)
    if not path.exists():
        raise GraphFormatError("file does not exist", path)
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            fields = splitter.split(s)
            if len(fields) < 2 or not fields[0] or not fields[1]:
                raise GraphFormatError(f"expected at least two fields, got {line.rstrip()!r}", path, lineno)
            out.append((fields[0], fields[1], lineno))
    return out


def _build(pairs, ids: IdMaps, num_users=None, num_items=None) -> BipartiteGraph:
    edges = np.array([(ids.user_index[u], ids.item_index[i]) for u, i, _ in pairs], dtype=np.int64).reshape(-1, 2)
    return BipartiteGraph.from_edges(
        ids.num_users if num_users is None else num_users,
        ids.num_items if num_items is None else num_items,
        edges,
    )


def load_interactions(path, sep: str = "auto") -> tuple[BipartiteGraph, IdMaps]:
    """Load a ``user item [ignored...]`` file into a deduplicated bipartite graph.

    IDs are assigned contiguously in order of first appearance. Lines starting
    with ``#`` are comments.
    """
    pairs = _read_pairs(path, sep)
    if not pairs:
        raise GraphFormatError("no interactions found", path)
    ids = IdMaps()
    for u, i, _ in pairs:
        ids.add_user(u)
        ids.add_item(i)
    return _build(pairs, ids), ids


def load_split(train_path, test_path, sep: str = "auto") -> DatasetSplit:
    """Load train/test files against one shared ID space (train IDs first)."""
    train_pairs = _read_pairs(train_path, sep)
    test_pairs = _read_pairs(test_path, sep)
    if not train_pairs:
        raise GraphFormatError("no interactions found", train_path)
    ids = IdMaps()
    for u, i, _ in train_pairs:
        ids.add_user(u)
        ids.add_item(i)
    for u, i, _ in test_pairs:
        ids.add_user(u)
        ids.add_item(i)
    train = _build(train_pairs, ids)
    test = _build(test_pairs, ids, ids.num_users, ids.num_items)
    return make_split(train, test, ids)


def make_split(train: BipartiteGraph, test: BipartiteGraph, ids: IdMaps | None = None) -> DatasetSplit:
    if (train.num_users, train.num_items) != (test.num_users, test.num_items):
        raise DataError("train and test graphs must share node counts")
    ids = ids or IdMaps.identity(train.num_users, train.num_items)
    overlap = []
    for u in range(train.num_users):
        common = np.intersect1d(train.items_of(u), test.items_of(u), assume_unique=True)
        overlap.extend((ids.user_ids[u], ids.item_ids[i]) for i in common)
    if overlap:
        raise SplitOverlapError(overlap)
    tests = tuple(np.array(test.items_of(u)) for u in range(test.num_users))
    for t in tests:
        t.setflags(write=False)
    return DatasetSplit(train, tests, ids)


def largest_connected_component(g: BipartiteGraph, ids: IdMaps | None = None) -> tuple[BipartiteGraph, IdMaps]:
    """Induced subgraph on the largest component, re-indexed.

    Ties between equally large components go to the one holding the smallest
    node number (users before items). The returned maps carry the original raw
    IDs, or the original indices when ``ids`` is omitted.
    """
    n = g.num_nodes
    if n == 0:
        raise PreconditionError("graph has no nodes")
    ids = ids or IdMaps.identity(g.num_users, g.num_items)
    U = g.num_users
    e = g.edges()
    rows = np.concatenate([e[:, 0], e[:, 1] + U])
    cols = np.concatenate([e[:, 1] + U, e[:, 0]])
    adj = sp.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
    _, labels = connected_components(adj, directed=False)
    sizes = np.bincount(labels)
    first_node = np.full(len(sizes), n, dtype=np.int64)
    np.minimum.at(first_node, labels, np.arange(n))
    best = min(range(len(sizes)), key=lambda c: (-sizes[c], first_node[c]))
    keep = labels == best
    keep_users = np.flatnonzero(keep[:U])
    keep_items = np.flatnonzero(keep[U:])
    new_u = np.full(U, -1, dtype=np.int64)
    new_u[keep_users] = np.arange(len(keep_users))
    new_i = np.full(g.num_items, -1, dtype=np.int64)
    new_i[keep_items] = np.arange(len(keep_items))
    mask = keep[e[:, 0]]
    sub_edges = np.column_stack([new_u[e[mask, 0]], new_i[e[mask, 1]]])
    sub = BipartiteGraph.from_edges(len(keep_users), len(keep_items), sub_edges)
    new_ids = IdMaps()
    for u in keep_users:
        new_ids.add_user(ids.user_ids[u])
    for i in keep_items:
        new_ids.add_item(ids.item_ids[i])
    return sub, new_ids


def write_interchange(g: BipartiteGraph, path) -> None:
    """Dump as ``U I E`` header plus ``u i`` lines in ascending order."""
    e = g.edges()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{g.num_users} {g.num_items} {g.num_edges}\n")
        for u, i in e:
            fh.write(f"{u} {i}\n")


def read_interchange(path) -> BipartiteGraph:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise GraphFormatError("header must be 'U I E'", path, 1)
        try:
            U, I, E = (int(x) for x in header)
        except ValueError:
            raise GraphFormatError("header must hold three integers", path, 1) from None
        edges = []
        for lineno, line in enumerate(fh, 2):
            parts = line.split()
            if len(parts) != 2:
                raise GraphFormatError(f"expected 'u i', got {line.rstrip()!r}", path, lineno)
            edges.append((int(parts[0]), int(parts[1])))
    if len(edges) != E:
        raise GraphFormatError(f"header announces {E} edges but file holds {len(edges)}", path)
    g = BipartiteGraph.from_edges(U, I, np.array(edges, dtype=np.int64).reshape(-1, 2))
    if g.num_edges != E:
        raise GraphFormatError("interchange file contains duplicate edges", path)
    return g


def write_interactions(path, pairs: Sequence[tuple], sep: str = " ") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for u, i in pairs:
            fh.write(f"{u}{sep}{i}\n")
