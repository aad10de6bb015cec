"""Seeded synthetic interaction data with planted communities."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import PreconditionError
from .graph_core import BipartiteGraph, IdMaps, make_split, write_interactions


@dataclass(frozen=True)
class SyntheticConfig:
    users: int
    items: int
    edges: int
    communities: int = 10
    intra: float = 0.85
    test_fraction: float = 0.2
    seed: int = 0


def generate_edges(cfg: SyntheticConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw ``cfg.edges`` distinct (user, item) pairs.

    Users and items each join one of ``cfg.communities`` groups uniformly.
    Every candidate edge picks a uniform user, then an item from the user's
    own group with probability ``cfg.intra`` and a uniform item otherwise,
    so intra-group pairs are far denser than cross-group ones.

    Returns ``(edges, user_group, item_group)``.
    """
    U, I, E, C = cfg.users, cfg.items, cfg.edges, cfg.communities
    if min(U, I) < 1 or C < 1:
        raise PreconditionError("users, items and communities must be positive")
    if not 0 <= E <= U * I:
        raise PreconditionError(f"cannot place {E} distinct edges on {U}x{I} pairs")
    if not 0.0 <= cfg.intra <= 1.0:
        raise PreconditionError("intra must be within [0, 1]")
    rng = np.random.default_rng(cfg.seed)
    user_group = rng.integers(0, C, size=U)
    item_group = rng.integers(0, C, size=I)
    members = [np.flatnonzero(item_group == c) for c in range(C)]
    # groups without items fall back to uniform draws
    sizes = np.array([len(m) for m in members])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    by_group = np.concatenate(members) if I else np.zeros(0, dtype=np.int64)

    keys = np.zeros(0, dtype=np.int64)
    while len(keys) < E:
        want = max(1024, int(1.3 * (E - len(keys))))
        us = rng.integers(0, U, size=want)
        g = user_group[us]
        local = rng.random(want) < cfg.intra
        local &= sizes[g] > 0
        its = rng.integers(0, I, size=want)
        pick = (rng.random(want) * np.maximum(sizes[g], 1)).astype(np.int64)
        its[local] = by_group[offsets[g[local]] + pick[local]]
        keys = np.concatenate([keys, us * I + its])
        _, first = np.unique(keys, return_index=True)
        keys = keys[np.sort(first)]
    keys = keys[:E]
    edges = np.column_stack(np.divmod(keys, I)).astype(np.int64)
    return edges, user_group, item_group


def generate_split(cfg: SyntheticConfig):
    """Community graph split at random into train/test edge sets (``DatasetSplit``)."""
    edges, _, _ = generate_edges(cfg)
    rng = np.random.default_rng([cfg.seed, 1])
    is_test = np.zeros(len(edges), dtype=bool)
    n_test = int(round(cfg.test_fraction * len(edges)))
    is_test[rng.permutation(len(edges))[:n_test]] = True
    train = BipartiteGraph.from_edges(cfg.users, cfg.items, edges[~is_test])
    test = BipartiteGraph.from_edges(cfg.users, cfg.items, edges[is_test])
    ids = IdMaps()
    for u in range(cfg.users):
        ids.add_user(f"u{u}")
    for i in range(cfg.items):
        ids.add_item(f"i{i}")
    return make_split(train, test, ids)


def write_split(split, out_dir) -> tuple[Path, Path]:
    """Write ``train.txt`` and ``test.txt`` with raw IDs, sorted by (user, item)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ids = split.ids
    train_path, test_path = out / "train.txt", out / "test.txt"
    write_interactions(train_path, [(ids.user_ids[u], ids.item_ids[i]) for u, i in split.train.edges()])
    test_pairs = [(ids.user_ids[u], ids.item_ids[i]) for u, t in enumerate(split.test_positives) for i in t]
    write_interactions(test_path, test_pairs)
    return train_path, test_path
