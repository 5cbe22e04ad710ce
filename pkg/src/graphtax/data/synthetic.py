"""Synthetic datasets with a known information channel.

* :func:`gen_feature_only` - the label is a threshold of the mean node
  feature; the topology is an independent random graph.
* :func:`gen_structure_only` - the label is the number of connected
  components; features are constant.
* :func:`gen_sbm_cluster` - CLUSTER-style node classification on stochastic
  block model graphs where only a few key nodes reveal their block.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import InputError
from ..graph import Dataset, Graph, TaskKind


def _erdos_renyi(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    u, v = np.triu_indices(n, k=1)
    keep = rng.random(len(u)) < p
    return np.stack([u[keep], v[keep]], axis=1)


def _relabel(rng: np.random.Generator, n: int, edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Random node ids, so that id order carries no class information."""
    perm = rng.permutation(n)
    return perm, (perm[edges] if len(edges) else edges)


def gen_feature_only(n_graphs: int, seed: int, n_min: int = 10, n_max: int = 20,
                     dim: int = 4, edge_prob: float = 0.2, name: str = "feature_only") -> Dataset:
    """Label = 1 iff the sum of the mean feature vector's entries is positive."""
    rng = np.random.default_rng(seed)
    graphs = []
    for _ in range(n_graphs):
        n = int(rng.integers(n_min, n_max + 1))
        center = rng.normal(size=(1, dim))
        x = center + rng.normal(size=(n, dim))
        label = int(x.mean(axis=0).sum() > 0)
        edges = _erdos_renyi(rng, n, edge_prob)
        graphs.append(Graph(n, edges, x, graph_label=label))
    return Dataset(name, graphs, TaskKind.GRAPH, 2)


def _path(start: int, length: int) -> list[tuple[int, int]]:
    return [(start + i, start + i + 1) for i in range(length - 1)]


def gen_structure_only(n_graphs: int, seed: int, m_min: int = 6, m_max: int = 10,
                       name: str = "structure_only") -> Dataset:
    """Class 0: one path on ``2m`` nodes.  Class 1: two disjoint paths on ``m`` nodes.

    Both classes draw ``m`` from the same range, so node count says nothing
    about the label.  ``m_max < 2 * m_min`` guarantees no class-1 component
    is as long as a class-0 graph.
    """
    if m_max >= 2 * m_min:
        raise InputError("m_max must be < 2 * m_min to keep the classes apart")
    rng = np.random.default_rng(seed)
    graphs = []
    for i in range(n_graphs):
        label = int(rng.integers(0, 2))
        m = int(rng.integers(m_min, m_max + 1))
        n = 2 * m
        pairs = _path(0, n) if label == 0 else _path(0, m) + _path(m, m)
        _, edges = _relabel(rng, n, np.array(pairs, dtype=np.int64))
        graphs.append(Graph(n, edges, np.ones((n, 1)), graph_label=label))
    return Dataset(name, graphs, TaskKind.GRAPH, 2)


@dataclass(frozen=True)
class SBMSpec:
    num_blocks: int = 6
    block_size_min: int = 5
    block_size_max: int = 15
    p: float = 0.55
    q: float = 0.35
    labeled_fraction: float = 1.0 / 15.0
    n_graphs: int = 100
    seed: int = 0
    name: str = "sbm_cluster"

    def __post_init__(self):
        if self.num_blocks < 2:
            raise InputError("an SBM needs at least two blocks")
        if not 0.0 <= self.q < self.p <= 1.0:
            raise InputError("need 0 <= q < p <= 1")
        if not 1 <= self.block_size_min <= self.block_size_max:
            raise InputError("invalid block size range")
        if not 0.0 <= self.labeled_fraction <= 1.0:
            raise InputError("labeled_fraction must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


def sbm_graph(spec: SBMSpec, rng: np.random.Generator) -> Graph:
    c = spec.num_blocks
    sizes = rng.integers(spec.block_size_min, spec.block_size_max + 1, size=c)
    block = np.repeat(np.arange(c), sizes)
    n = len(block)
    u, v = np.triu_indices(n, k=1)
    prob = np.where(block[u] == block[v], spec.p, spec.q)
    keep = rng.random(len(u)) < prob
    edges = np.stack([u[keep], v[keep]], axis=1)

    features = np.zeros((n, c + 1))
    features[:, c] = 1.0
    start = 0
    for b, size in enumerate(sizes):
        n_key = math.ceil(spec.labeled_fraction * size)
        keys = start + rng.choice(size, n_key, replace=False)
        features[keys, c] = 0.0
        features[keys, b] = 1.0
        start += size

    perm, edges = _relabel(rng, n, edges)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(n)
    return Graph(n, edges, features[inv], node_labels=block[inv])


def gen_sbm_cluster(spec: SBMSpec = SBMSpec()) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    graphs = [sbm_graph(spec, rng) for _ in range(spec.n_graphs)]
    return Dataset(spec.name, graphs, TaskKind.NODE_INDUCTIVE, spec.num_blocks)
