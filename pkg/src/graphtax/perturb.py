"""Dataset perturbations that remove or emphasise one information channel.

Every transform keeps node count, labels, task kind, split and graph order;
only node features or the edge set change.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .graph import Dataset, Graph, bfs_ball, degrees


class Kind(str, enum.Enum):
    IDENTITY = "identity"
    NO_NODE_FEATURES = "no-node-features"
    NODE_DEGREE = "node-degree"
    NO_EDGES = "no-edges"
    FULLY_CONNECTED = "fully-connected"
    FRAGMENTED = "fragmented"


class SeedPolicy(str, enum.Enum):
    LOWEST_ID = "lowest-id"
    HIGHEST_DEGREE = "highest-degree"


@dataclass(frozen=True)
class Perturbation:
    kind: Kind
    k: int | None = None
    seed_policy: SeedPolicy = SeedPolicy.LOWEST_ID

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "seed_policy", SeedPolicy(self.seed_policy))
        if self.kind is Kind.FRAGMENTED:
            if self.k is None or int(self.k) < 1:
                raise InputError("fragmented perturbation needs k >= 1")
            object.__setattr__(self, "k", int(self.k))
        elif self.k is not None:
            raise InputError(f"{self.kind.value} takes no k")

    @property
    def name(self) -> str:
        if self.kind is not Kind.FRAGMENTED:
            return self.kind.value
        name = f"fragmented-{self.k}"
        if self.seed_policy is not SeedPolicy.LOWEST_ID:
            name += f":{self.seed_policy.value}"
        return name

    @classmethod
    def parse(cls, name: str) -> "Perturbation":
        """Inverse of :attr:`name`, e.g. ``"fragmented-2:highest-degree"``."""
        text = name.strip().lower()
        if text.startswith("fragmented"):
            body, _, policy = text.partition(":")
            k = body[len("fragmented"):].lstrip("-")
            if not k.isdigit():
                raise InputError(f"cannot parse perturbation '{name}'")
            return cls(Kind.FRAGMENTED, int(k), SeedPolicy(policy) if policy else SeedPolicy.LOWEST_ID)
        try:
            return cls(Kind(text))
        except ValueError:
            raise InputError(f"unknown perturbation '{name}'") from None

    def __str__(self):
        return self.name


IDENTITY = Perturbation(Kind.IDENTITY)

CANONICAL_SUITE: tuple[Perturbation, ...] = (
    IDENTITY,
    Perturbation(Kind.NO_NODE_FEATURES),
    Perturbation(Kind.NODE_DEGREE),
    Perturbation(Kind.NO_EDGES),
    Perturbation(Kind.FULLY_CONNECTED),
    Perturbation(Kind.FRAGMENTED, 1),
    Perturbation(Kind.FRAGMENTED, 2),
    Perturbation(Kind.FRAGMENTED, 3),
)


def no_node_features(g: Graph) -> Graph:
    return g.replace(features=np.ones((g.n, 1)))


def no_edges(g: Graph) -> Graph:
    return g.replace(edges=np.zeros((0, 2), dtype=np.int64))


def fully_connected(g: Graph) -> Graph:
    if g.n < 2:
        return no_edges(g)
    u, v = np.triu_indices(g.n, k=1)
    return g.replace(edges=np.stack([u, v], axis=1))


def node_degree_features(d: Dataset) -> Dataset:
    """One-hot degree features over the dataset-wide sorted degree vocabulary."""
    degs = [degrees(g) for g in d.graphs]
    vocab = np.unique(np.concatenate(degs)) if degs else np.zeros(0, dtype=np.int64)
    out = []
    for g, deg in zip(d.graphs, degs):
        onehot = np.zeros((g.n, len(vocab)))
        onehot[np.arange(g.n), np.searchsorted(vocab, deg)] = 1.0
        out.append(g.replace(features=onehot))
    return d.with_graphs(out)


def fragment_assignment(g: Graph, k: int, seed_policy: SeedPolicy = SeedPolicy.LOWEST_ID) -> np.ndarray:
    """Greedy ball cover: component id per node.

    Seeds are drawn from the still-unassigned nodes; each ball grows through
    unassigned nodes only, up to ``k - 1`` hops, so every fragment is connected.
    """
    if k < 1:
        raise InputError("k must be >= 1")
    seed_policy = SeedPolicy(seed_policy)
    comp = np.full(g.n, -1, dtype=np.int64)
    adj = g.neighbors()
    if seed_policy is SeedPolicy.HIGHEST_DEGREE:
        deg = degrees(g)
        order = sorted(range(g.n), key=lambda v: (-deg[v], v))
    else:
        order = list(range(g.n))
    cid = 0
    for seed in order:
        if comp[seed] >= 0:
            continue
        ball = bfs_ball(g, seed, k - 1, allowed=lambda v: comp[v] < 0, adj=adj)
        comp[list(ball)] = cid
        cid += 1
    return comp


def fragmented(g: Graph, k: int, seed_policy: SeedPolicy = SeedPolicy.LOWEST_ID) -> Graph:
    comp = fragment_assignment(g, k, seed_policy)
    if not g.num_edges:
        return g
    keep = comp[g.edges[:, 0]] == comp[g.edges[:, 1]]
    return g.replace(edges=g.edges[keep])


def apply(p: Perturbation, d: Dataset) -> Dataset:
    kind = p.kind
    if kind is Kind.IDENTITY:
        return d
    if kind is Kind.NODE_DEGREE:
        return node_degree_features(d)
    if kind is Kind.NO_NODE_FEATURES:
        return d.map(no_node_features)
    if kind is Kind.NO_EDGES:
        return d.map(no_edges)
    if kind is Kind.FULLY_CONNECTED:
        return d.map(fully_connected)
    return d.map(lambda g: fragmented(g, p.k, p.seed_policy))


def parse_suite(names) -> tuple[Perturbation, ...]:
    suite = tuple(p if isinstance(p, Perturbation) else Perturbation.parse(p) for p in names)
    if not suite:
        raise InputError("perturbation suite is empty")
    if IDENTITY not in suite:
        raise InputError("perturbation suite must contain identity")
    if len(set(suite)) != len(suite):
        raise InputError("perturbation suite has duplicates")
    return suite


__all__ = [
    "CANONICAL_SUITE",
    "IDENTITY",
    "Kind",
    "Perturbation",
    "SeedPolicy",
    "apply",
    "fragment_assignment",
    "fragmented",
    "fully_connected",
    "no_edges",
    "no_node_features",
    "node_degree_features",
    "parse_suite",
]
