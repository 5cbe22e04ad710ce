"""GCN / GAT / GIN / ChebNet convolutions and the fixed network stack.

Every model is: (node tasks only) a 2-layer embedding MLP, five convolution
blocks ``h <- relu(batchnorm(conv(h))) + skip(h)``, global mean pooling for
graph tasks, and a 2-layer MLP classifier.  A batch of graphs is processed as
one block-diagonal disjoint union.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from . import nn
from .errors import InputError, NumericError
from .graph import Graph, TaskKind
from .nn import Tensor


class ModelKind(str, enum.Enum):
    GCN = "gcn"
    GAT = "gat"
    GIN = "gin"
    CHEBNET = "chebnet"


@dataclass(frozen=True)
class ModelConfig:
    kind: ModelKind = ModelKind.GCN
    hidden_dim: int = 64
    num_conv_layers: int = 5
    gat_heads: int = 4
    cheb_k: int = 3
    gin_eps: float = 0.0
    embed_mlp_layers: int = 2
    head_mlp_layers: int = 2
    dropout: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.hidden_dim < 1 or self.num_conv_layers < 1:
            raise InputError("hidden_dim and num_conv_layers must be positive")
        if self.kind is ModelKind.GAT and self.hidden_dim % self.gat_heads:
            raise InputError("hidden_dim must be divisible by gat_heads")
        if self.cheb_k < 1:
            raise InputError("cheb_k must be >= 1")
        if self.embed_mlp_layers < 1 or self.head_mlp_layers < 1:
            raise InputError("MLPs need at least one layer")
        if not 0.0 <= self.dropout < 1.0:
            raise InputError("dropout must lie in [0, 1)")

    def with_overrides(self, **kw) -> "ModelConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["kind"] = self.kind.value
        return d


class GraphBatch:
    """Disjoint union of graphs with lazily built constant operators."""

    def __init__(self, graphs: Sequence[Graph], dtype=np.float64):
        self.dtype = np.dtype(dtype)
        self.sizes = np.array([g.n for g in graphs], dtype=np.int64)
        self.num_graphs = len(graphs)
        offsets = np.concatenate([[0], np.cumsum(self.sizes)])
        self.n = int(offsets[-1])
        dims = {g.feature_dim for g in graphs}
        if len(dims) > 1:
            raise InputError(f"graphs in a batch disagree on feature width: {sorted(dims)}")
        width = dims.pop() if dims else 0
        self.x = np.concatenate([g.features for g in graphs]).astype(self.dtype) if graphs else np.zeros((0, width))
        self.graph_index = np.repeat(np.arange(self.num_graphs), self.sizes)
        parts = [g.edges + off for g, off in zip(graphs, offsets[:-1]) if g.num_edges]
        self.edges = np.concatenate(parts) if parts else np.zeros((0, 2), dtype=np.int64)
        self.graphs = tuple(graphs)
        self._ops: dict = {}

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        u, v = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        data = np.ones(len(rows), dtype=self.dtype)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))

    @cached_property
    def degree(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    @cached_property
    def gcn_operator(self) -> sp.csr_matrix:
        """``D~^-1/2 (A + I) D~^-1/2`` with ``D~`` the degrees of ``A + I``."""
        d = 1.0 / np.sqrt(self.degree + 1.0)
        a_hat = self.adjacency + sp.identity(self.n, dtype=self.dtype, format="csr")
        return sp.csr_matrix(sp.diags(d) @ a_hat @ sp.diags(d), dtype=self.dtype)

    def gin_operator(self, eps: float) -> sp.csr_matrix:
        key = ("gin", eps)
        if key not in self._ops:
            eye = sp.identity(self.n, dtype=self.dtype)
            self._ops[key] = sp.csr_matrix(self.adjacency + (1.0 + eps) * eye, dtype=self.dtype)
        return self._ops[key]

    def cheb_operator(self, lambda_max: float = 2.0) -> sp.csr_matrix:
        """Rescaled Laplacian ``(2 / lambda_max) L - I`` for ``L = I - D^-1/2 A D^-1/2``.

        Isolated nodes have ``L_vv = 1`` (their ``D^-1/2`` entry is taken as 0).
        """
        key = ("cheb", lambda_max)
        if key in self._ops:
            return self._ops[key]
        deg = self.degree
        d = np.zeros_like(deg)
        d[deg > 0] = 1.0 / np.sqrt(deg[deg > 0])
        eye = sp.identity(self.n, dtype=self.dtype, format="csr")
        lap = eye - sp.diags(d) @ self.adjacency @ sp.diags(d)
        self._ops[key] = sp.csr_matrix((2.0 / lambda_max) * lap - eye, dtype=self.dtype)
        return self._ops[key]

    @cached_property
    def attention_index(self) -> tuple[np.ndarray, np.ndarray]:
        """(source, target) pairs over ``N(u) + {u}``, sorted by target."""
        loops = np.arange(self.n)
        u, v = self.edges[:, 0], self.edges[:, 1]
        dst = np.concatenate([u, v, loops])
        src = np.concatenate([v, u, loops])
        order = np.lexsort((src, dst))
        return src[order], dst[order]


def gcn_propagation(g: Graph) -> np.ndarray:
    return GraphBatch([g]).gcn_operator.toarray()


def _linear(x: Tensor, p: nn.ParamStore, name: str) -> Tensor:
    out = nn.matmul(x, p[name + ".w"])
    if name + ".b" in p:
        out = nn.add(out, p[name + ".b"])
    return out


def _mlp(x: Tensor, p: nn.ParamStore, name: str, layers: int, train: bool = False,
         dropout: float = 0.0, rng: Optional[np.random.Generator] = None) -> Tensor:
    for i in range(layers):
        x = _linear(x, p, f"{name}.{i}")
        if i < layers - 1:
            x = nn.relu(x)
            if train and dropout > 0:
                x = nn.dropout(x, dropout, rng)
    return x


def _add_linear(p: nn.ParamStore, rng, name, fan_in, fan_out, bias=True):
    p.add(name + ".w", nn.glorot(rng, fan_in, fan_out))
    if bias:
        p.add(name + ".b", np.zeros((1, fan_out)))


def _add_mlp(p, rng, name, dims):
    for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
        _add_linear(p, rng, f"{name}.{i}", a, b)


def conv_layer(kind: ModelKind, h: Tensor, batch: GraphBatch, p: nn.ParamStore, name: str,
               config: ModelConfig) -> Tensor:
    """The bare convolution (no normalisation, activation or skip)."""
    kind = ModelKind(kind)
    if h.shape[0] != batch.n:
        raise InputError(f"{name}: {h.shape[0]} feature rows for {batch.n} nodes")
    if kind is ModelKind.GCN:
        return nn.matmul(nn.spmm(batch.gcn_operator, h), p[name + ".w"])
    if kind is ModelKind.GIN:
        agg = nn.spmm(batch.gin_operator(config.gin_eps), h)
        return _mlp(agg, p, name + ".mlp", 2)
    if kind is ModelKind.CHEBNET:
        lap = batch.cheb_operator()
        terms = [h]
        if config.cheb_k > 1:
            terms.append(nn.spmm(lap, h))
        for _ in range(2, config.cheb_k):
            terms.append(nn.sub(nn.scale(nn.spmm(lap, terms[-1]), 2.0), terms[-2]))
        return nn.add_n(*(nn.matmul(t, p[f"{name}.w{j}"]) for j, t in enumerate(terms)))
    return _gat(h, batch, p, name, config)


def _gat(h: Tensor, batch: GraphBatch, p: nn.ParamStore, name: str, config: ModelConfig) -> Tensor:
    heads = config.gat_heads
    width = config.hidden_dim // heads
    # column j of the head-sum matrix collects the features of head j
    head_sum = np.kron(np.eye(heads), np.ones((width, 1))).astype(batch.dtype)
    src, dst = batch.attention_index
    wh = nn.matmul(h, p[name + ".w"])
    score_dst = nn.matmul(nn.mul(wh, p[name + ".a_dst"]), Tensor(head_sum))
    score_src = nn.matmul(nn.mul(wh, p[name + ".a_src"]), Tensor(head_sum))
    e = nn.leaky_relu(nn.add(nn.gather_rows(score_dst, dst), nn.gather_rows(score_src, src)), 0.2)
    alpha = nn.segment_softmax(e, dst, batch.n)
    weights = nn.matmul(alpha, Tensor(head_sum.T))
    msg = nn.mul(nn.gather_rows(wh, src), weights)
    return nn.segment_sum(msg, dst, batch.n)


class GNNModel:
    def __init__(self, config: ModelConfig, input_dim: int, num_classes: int, task: TaskKind,
                 seed: int = 0, dtype=np.float64):
        if input_dim < 1:
            raise InputError("input_dim must be >= 1")
        if num_classes < 1:
            raise InputError("num_classes must be >= 1")
        self.config = config
        self.input_dim = input_dim
        self.num_classes = num_classes
        self.task = TaskKind(task)
        self.dtype = np.dtype(dtype)
        self.params = nn.ParamStore(self.dtype)
        self.bn: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        self._build(np.random.default_rng(seed))

    def _build(self, rng):
        c, p, hid = self.config, self.params, self.config.hidden_dim
        width = self.input_dim
        if self.task.node_level:
            _add_mlp(p, rng, "embed", [width] + [hid] * c.embed_mlp_layers)
            width = hid
        for i in range(c.num_conv_layers):
            name = f"conv{i}"
            if c.kind is ModelKind.GCN:
                _add_linear(p, rng, name, width, hid, bias=False)
            elif c.kind is ModelKind.GIN:
                _add_mlp(p, rng, name + ".mlp", [width, hid, hid])
            elif c.kind is ModelKind.CHEBNET:
                for j in range(c.cheb_k):
                    p.add(f"{name}.w{j}", nn.glorot(rng, width, hid))
            else:
                per_head = hid // c.gat_heads
                p.add(name + ".w", nn.glorot(rng, width, hid))
                p.add(name + ".a_dst", nn.glorot(rng, per_head, 2 * per_head, shape=(1, hid)))
                p.add(name + ".a_src", nn.glorot(rng, per_head, 2 * per_head, shape=(1, hid)))
            p.add(name + ".bn.gamma", np.ones((1, hid)))
            p.add(name + ".bn.beta", np.zeros((1, hid)))
            self.bn[name] = (np.zeros(hid, dtype=self.dtype), np.ones(hid, dtype=self.dtype))
            if width != hid:
                _add_linear(p, rng, name + ".skip", width, hid, bias=False)
            width = hid
        _add_mlp(p, rng, "head", [hid] * c.head_mlp_layers + [self.num_classes])

    @property
    def num_parameters(self) -> int:
        return self.params.count()

    def state(self) -> dict:
        return {
            "params": self.params.snapshot(),
            "bn": {k: (m.copy(), v.copy()) for k, (m, v) in self.bn.items()},
        }

    def load_state(self, state: dict) -> None:
        self.params.load(state["params"])
        for k, (m, v) in state["bn"].items():
            self.bn[k][0][:] = m
            self.bn[k][1][:] = v

    def forward(self, batch: GraphBatch, train: bool = False,
                rng: Optional[np.random.Generator] = None) -> Tensor:
        c, p = self.config, self.params
        if batch.x.shape[1] != self.input_dim:
            raise InputError(f"model expects {self.input_dim} input features, batch has {batch.x.shape[1]}")
        if batch.dtype != self.dtype:
            raise InputError(f"batch dtype {batch.dtype} differs from model dtype {self.dtype}")
        h = Tensor(batch.x)
        if self.task.node_level:
            h = self._stage("embed", lambda: _mlp(h, p, "embed", c.embed_mlp_layers))
        for i in range(c.num_conv_layers):
            name = f"conv{i}"
            h = self._stage(name, lambda h=h, name=name: self._block(h, batch, name, train))
        if not self.task.node_level:
            h = nn.row_mean_pool(h, batch.graph_index, batch.num_graphs)
        return self._stage("head", lambda: _mlp(h, p, "head", c.head_mlp_layers, train, c.dropout, rng))

    def _block(self, h: Tensor, batch: GraphBatch, name: str, train: bool) -> Tensor:
        p = self.params
        z = conv_layer(self.config.kind, h, batch, p, name, self.config)
        rm, rv = self.bn[name]
        z = nn.batchnorm(z, p[name + ".bn.gamma"], p[name + ".bn.beta"], rm, rv, train)
        z = nn.relu(z)
        skip = nn.matmul(h, p[name + ".skip.w"]) if name + ".skip.w" in p else h
        return nn.add(z, skip)

    @staticmethod
    def _stage(name, fn):
        try:
            return fn()
        except NumericError as exc:
            raise NumericError(f"{name}: {exc}") from exc


def assemble(config: ModelConfig, input_dim: int, num_classes: int, task: TaskKind,
             seed: int = 0, dtype=np.float64) -> GNNModel:
    return GNNModel(config, input_dim, num_classes, task, seed=seed, dtype=dtype)


def forward(model: GNNModel, graphs: Sequence[Graph] | GraphBatch, train: bool = False,
            rng: Optional[np.random.Generator] = None) -> Tensor:
    batch = graphs if isinstance(graphs, GraphBatch) else GraphBatch(graphs, model.dtype)
    return model.forward(batch, train=train, rng=rng)
