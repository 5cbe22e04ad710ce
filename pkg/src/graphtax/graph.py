"""Immutable graph/dataset containers and the elementary graph algorithms."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import InputError


class TaskKind(str, enum.Enum):
    GRAPH = "graph-classification"
    NODE_INDUCTIVE = "node-inductive"
    NODE_TRANSDUCTIVE = "node-transductive"

    @property
    def node_level(self) -> bool:
        return self is not TaskKind.GRAPH


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def canonical_edges(pairs: Iterable[Sequence[int]] | np.ndarray) -> np.ndarray:
    """Return pairs as a sorted ``(m, 2)`` int64 array with ``u < v``.

    Self-loops are dropped and duplicate or reversed pairs collapsed; this is
    the cleaning step loaders apply before building a :class:`Graph`.
    """
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    arr = np.sort(arr, axis=1)
    arr = arr[arr[:, 0] != arr[:, 1]]
    if len(arr) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(arr, axis=0)


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph with dense node features.

    ``edges`` is stored canonically (each row ``u < v``, rows sorted), so two
    graphs with the same edge set compare equal regardless of input order.
    """

    n: int
    edges: np.ndarray
    features: np.ndarray
    node_labels: Optional[np.ndarray] = None
    graph_label: Optional[int] = None

    def __post_init__(self):
        n = int(self.n)
        if n < 0:
            raise InputError(f"node count must be non-negative, got {n}")
        object.__setattr__(self, "n", n)

        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(edges):
            if edges.min() < 0 or edges.max() >= n:
                raise InputError(f"edge endpoint outside [0, {n})")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise InputError("self-loops are not stored")
            edges = np.sort(edges, axis=1)
            edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
            if np.any(np.all(edges[1:] == edges[:-1], axis=1)):
                raise InputError("duplicate edge")
        else:
            edges = np.zeros((0, 2), dtype=np.int64)
        object.__setattr__(self, "edges", _frozen(edges))

        feats = np.array(self.features, dtype=np.float64)
        if feats.ndim == 1 and n == 0:
            feats = feats.reshape(0, 0)
        if feats.ndim != 2 or feats.shape[0] != n:
            raise InputError(f"features must have shape ({n}, d), got {feats.shape}")
        object.__setattr__(self, "features", _frozen(feats))

        if self.node_labels is not None:
            labels = np.array(self.node_labels, dtype=np.int64).reshape(-1)
            if len(labels) != n:
                raise InputError(f"expected {n} node labels, got {len(labels)}")
            object.__setattr__(self, "node_labels", _frozen(labels))
        if self.graph_label is not None:
            object.__setattr__(self, "graph_label", int(self.graph_label))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def replace(self, **changes) -> "Graph":
        kw = dict(
            n=self.n,
            edges=self.edges,
            features=self.features,
            node_labels=self.node_labels,
            graph_label=self.graph_label,
        )
        kw.update(changes)
        return Graph(**kw)

    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges.tolist():
            adj[u].append(v)
            adj[v].append(u)
        for row in adj:
            row.sort()
        return adj

    def permute(self, perm: Sequence[int]) -> "Graph":
        """Relabel nodes so that old node ``v`` becomes ``perm[v]``."""
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self.n)):
            raise InputError("not a permutation of the node ids")
        inv = np.empty_like(perm)
        inv[perm] = np.arange(self.n)
        return Graph(
            n=self.n,
            edges=perm[self.edges] if self.num_edges else self.edges,
            features=self.features[inv],
            node_labels=None if self.node_labels is None else self.node_labels[inv],
            graph_label=self.graph_label,
        )

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and self.graph_label == other.graph_label
            and np.array_equal(self.edges, other.edges)
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
            and _opt_equal(self.node_labels, other.node_labels)
        )

    __hash__ = None


def _opt_equal(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return np.array_equal(a, b)


@dataclass(frozen=True)
class SplitSpec:
    """Fixed train/validation/test index sets.

    Indices refer to graphs for inductive tasks and to nodes of the single
    graph for transductive ones.
    """

    train: tuple[int, ...]
    val: tuple[int, ...]
    test: tuple[int, ...]

    def __post_init__(self):
        for name in ("train", "val", "test"):
            idx = tuple(int(i) for i in getattr(self, name))
            if not idx:
                raise InputError(f"split set '{name}' is empty")
            object.__setattr__(self, name, idx)
        a, b, c = set(self.train), set(self.val), set(self.test)
        if len(a) != len(self.train) or len(b) != len(self.val) or len(c) != len(self.test):
            raise InputError("split sets contain repeated indices")
        if a & b or a & c or b & c:
            raise InputError("split sets must be pairwise disjoint")

    def check_range(self, size: int) -> None:
        for idx in (self.train, self.val, self.test):
            if min(idx) < 0 or max(idx) >= size:
                raise InputError(f"split index outside [0, {size})")

    def to_dict(self) -> dict:
        return {"train": list(self.train), "val": list(self.val), "test": list(self.test)}


@dataclass(frozen=True)
class Dataset:
    name: str
    graphs: tuple[Graph, ...]
    task: TaskKind
    num_classes: int
    split: Optional[SplitSpec] = None

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        object.__setattr__(self, "task", TaskKind(self.task))
        if self.num_classes < 1:
            raise InputError("num_classes must be positive")
        if self.task is TaskKind.NODE_TRANSDUCTIVE and len(self.graphs) != 1:
            raise InputError("a transductive dataset holds exactly one graph")
        for i, g in enumerate(self.graphs):
            if self.task is TaskKind.GRAPH:
                if g.graph_label is None:
                    raise InputError(f"graph {i} has no graph label")
                labels = [g.graph_label]
            else:
                if g.node_labels is None:
                    raise InputError(f"graph {i} has no node labels")
                labels = g.node_labels.tolist()
            if labels and (min(labels) < 0 or max(labels) >= self.num_classes):
                raise InputError(f"graph {i}: label outside [0, {self.num_classes})")
        if self.split is not None:
            size = self.graphs[0].n if self.task is TaskKind.NODE_TRANSDUCTIVE else len(self.graphs)
            self.split.check_range(size)

    def __len__(self) -> int:
        return len(self.graphs)

    @property
    def feature_dim(self) -> int:
        return self.graphs[0].feature_dim if self.graphs else 0

    def with_graphs(self, graphs: Sequence[Graph]) -> "Dataset":
        return Dataset(self.name, tuple(graphs), self.task, self.num_classes, self.split)

    def map(self, fn: Callable[[Graph], Graph]) -> "Dataset":
        return self.with_graphs([fn(g) for g in self.graphs])


def degrees(g: Graph) -> np.ndarray:
    deg = np.zeros(g.n, dtype=np.int64)
    if g.num_edges:
        np.add.at(deg, g.edges.ravel(), 1)
    return deg


def bfs_ball(
    g: Graph,
    seed: int,
    radius: int,
    allowed: Optional[Callable[[int], bool]] = None,
    adj: Optional[list[list[int]]] = None,
) -> set[int]:
    """Nodes within ``radius`` hops of ``seed`` along paths inside ``allowed``.

    ``adj`` may be passed to reuse a precomputed neighbour list.
    """
    if not 0 <= seed < g.n:
        raise InputError(f"seed {seed} outside [0, {g.n})")
    if radius < 0:
        raise InputError("radius must be non-negative")
    if allowed is not None and not allowed(seed):
        raise InputError(f"seed {seed} is not an allowed node")
    adj = g.neighbors() if adj is None else adj
    ball = {seed}
    frontier = [seed]
    for _ in range(radius):
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if v not in ball and (allowed is None or allowed(v)):
                    ball.add(v)
                    nxt.append(v)
        if not nxt:
            break
        frontier = nxt
    return ball


def connected_components(g: Graph) -> list[list[int]]:
    """Components as sorted node lists, ordered by their smallest node."""
    adj = g.neighbors()
    seen = np.zeros(g.n, dtype=bool)
    comps = []
    for s in range(g.n):
        if seen[s]:
            continue
        seen[s] = True
        comp = [s]
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    comp.append(v)
                    queue.append(v)
        comps.append(sorted(comp))
    return comps
