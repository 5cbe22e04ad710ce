"""Reverse-mode autodiff over 2-D numpy arrays.

Each primitive returns a new :class:`Tensor` that remembers its parents and a
closure mapping the output gradient to one gradient per parent.  Calling
:meth:`Tensor.backward` on a scalar walks the tape in reverse topological
order and accumulates into ``.grad`` of every tensor that requires it.

Constant operands (graph operators, index arrays, labels) are plain numpy or
scipy.sparse objects and never receive gradients.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..errors import InputError, NumericError


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_fn")

    def __init__(self, data, requires_grad=False, parents=(), backward_fn=None):
        data = np.asarray(data)
        if data.ndim != 2:
            raise InputError(f"tensors are 2-D, got shape {data.shape}")
        self.data = data
        self.grad = None
        self.requires_grad = requires_grad
        self.parents = parents
        self.backward_fn = backward_fn

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def backward(self):
        if self.shape != (1, 1):
            raise InputError("backward() needs a scalar (1x1) tensor")
        order = _topo(self)
        self.grad = np.ones_like(self.data)
        for t in reversed(order):
            if t.backward_fn is None or t.grad is None:
                continue
            grads = t.backward_fn(t.grad)
            for p, g in zip(t.parents, grads):
                if g is None or not p.requires_grad:
                    continue
                p.grad = g if p.grad is None else p.grad + g
            # intermediate results are single-use; drop their gradient
            t.grad = None


def _topo(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        t, done = stack.pop()
        if done:
            order.append(t)
            continue
        if id(t) in seen:
            continue
        seen.add(id(t))
        stack.append((t, True))
        for p in t.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def _finite(arr: np.ndarray, op: str) -> None:
    # a sum is non-finite iff some entry is (barring overflow of the sum itself)
    if not np.isfinite(arr.sum()) and not np.isfinite(arr).all():
        raise NumericError(f"non-finite values produced by {op}")


def _make(data, parents, backward_fn, op) -> Tensor:
    _finite(data, op)
    if any(p.requires_grad for p in parents):
        return Tensor(data, True, parents, backward_fn)
    return Tensor(data)


def _rowvec_or_same(a: Tensor, b: Tensor, op: str) -> bool:
    """True when ``b`` broadcasts as a row vector over ``a``."""
    if a.shape == b.shape:
        return False
    if b.shape == (1, a.shape[1]):
        return True
    raise InputError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise InputError(f"matmul: shapes {a.shape} and {b.shape} do not align")
    return _make(
        a.data @ b.data,
        (a, b),
        lambda g: (g @ b.data.T if a.requires_grad else None, a.data.T @ g if b.requires_grad else None),
        "matmul",
    )


def spmm(op, x: Tensor) -> Tensor:
    """Multiply a constant (dense or sparse) operator into ``x``."""
    if op.shape[1] != x.shape[0]:
        raise InputError(f"spmm: operator {op.shape} does not match {x.shape}")
    out = op @ x.data
    return _make(np.asarray(out), (x,), lambda g: (np.asarray(op.T @ g),), "spmm")


def add(a: Tensor, b: Tensor) -> Tensor:
    row = _rowvec_or_same(a, b, "add")

    def back(g):
        gb = g.sum(axis=0, keepdims=True) if row else g
        return g, gb

    return _make(a.data + b.data, (a, b), back, "add")


def add_n(*xs: Tensor) -> Tensor:
    out = xs[0]
    for x in xs[1:]:
        out = add(out, x)
    return out


def scale(a: Tensor, c: float) -> Tensor:
    return _make(a.data * c, (a,), lambda g: (g * c,), "scale")


def sub(a: Tensor, b: Tensor) -> Tensor:
    return add(a, scale(b, -1.0))


def mul(a: Tensor, b: Tensor) -> Tensor:
    row = _rowvec_or_same(a, b, "mul")

    def back(g):
        ga = g * b.data if a.requires_grad else None
        gb = None
        if b.requires_grad:
            gb = g * a.data
            if row:
                gb = gb.sum(axis=0, keepdims=True)
        return ga, gb

    return _make(a.data * b.data, (a, b), back, "mul")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _make(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,), "relu")


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    factor = np.where(x.data > 0, 1.0, slope).astype(x.data.dtype)
    return _make(x.data * factor, (x,), lambda g: (g * factor,), "leaky_relu")


def row_softmax(x: Tensor) -> Tensor:
    z = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=1, keepdims=True)

    def back(g):
        return (s * (g - (g * s).sum(axis=1, keepdims=True)),)

    return _make(s, (x,), back, "row_softmax")


def gather_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)

    def back(g):
        return (np.asarray(segment_matrix(idx, x.shape[0], g.dtype) @ g),)

    return _make(x.data[idx], (x,), back, "gather_rows")


def segment_matrix(seg: np.ndarray, nseg: int, dtype=np.float64) -> sp.csr_matrix:
    """Sparse ``(nseg, len(seg))`` indicator so that ``M @ X`` sums rows per segment."""
    seg = np.asarray(seg, dtype=np.int64)
    m = len(seg)
    return sp.csr_matrix((np.ones(m, dtype=dtype), (seg, np.arange(m))), shape=(nseg, m))


def segment_sum(x: Tensor, seg: np.ndarray, nseg: int) -> Tensor:
    if len(seg) != x.shape[0]:
        raise InputError("segment ids must match the row count")
    return spmm(segment_matrix(seg, nseg, x.data.dtype), x)


def row_mean_pool(x: Tensor, seg: np.ndarray, nseg: int) -> Tensor:
    """Mean of the rows in each segment; empty segments yield zeros."""
    seg = np.asarray(seg, dtype=np.int64)
    counts = np.bincount(seg, minlength=nseg).astype(x.data.dtype)
    counts[counts == 0] = 1
    m = segment_matrix(seg, nseg, x.data.dtype)
    return spmm(sp.diags(1.0 / counts) @ m, x)


def segment_softmax(x: Tensor, seg: np.ndarray, nseg: int) -> Tensor:
    """Column-wise softmax over the rows that share a segment id."""
    seg = np.asarray(seg, dtype=np.int64)
    if len(seg) != x.shape[0]:
        raise InputError("segment ids must match the row count")
    mx = np.full((nseg, x.shape[1]), -np.inf, dtype=x.data.dtype)
    np.maximum.at(mx, seg, x.data)
    e = np.exp(x.data - mx[seg])
    m = segment_matrix(seg, nseg, x.data.dtype)
    denom = np.asarray(m @ e)
    s = e / denom[seg]

    def back(g):
        gs = np.asarray(m @ (g * s))
        return (s * (g - gs[seg]),)

    return _make(s, (x,), back, "segment_softmax")


def dropout(x: Tensor, p: float, rng: np.random.Generator) -> Tensor:
    if p <= 0.0:
        return x
    keep = (rng.random(x.shape) >= p).astype(x.data.dtype) / (1.0 - p)
    return _make(x.data * keep, (x,), lambda g: (g * keep,), "dropout")


def batchnorm(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray,
              running_var: np.ndarray, train: bool, momentum: float = 0.1, eps: float = 1e-5) -> Tensor:
    """Column-wise batch normalisation over all rows of ``x``.

    In train mode the running statistics are updated in place.
    """
    if train:
        n = x.shape[0]
        if n < 1:
            raise InputError("batchnorm needs at least one row in train mode")
        mu = x.data.mean(axis=0, keepdims=True)
        var = x.data.var(axis=0, keepdims=True)
        unbiased = var * n / (n - 1) if n > 1 else var
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu.ravel()
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased.ravel()
    else:
        n = x.shape[0]
        mu = running_mean.reshape(1, -1).astype(x.data.dtype)
        var = running_var.reshape(1, -1).astype(x.data.dtype)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = xhat * gamma.data + beta.data

    def back(g):
        dxhat = g * gamma.data
        if train:
            dx = inv * (dxhat - dxhat.mean(axis=0, keepdims=True)
                        - xhat * (dxhat * xhat).mean(axis=0, keepdims=True))
        else:
            dx = dxhat * inv
        return dx, (g * xhat).sum(axis=0, keepdims=True), g.sum(axis=0, keepdims=True)

    return _make(out, (x, gamma, beta), back, "batchnorm")


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under ``softmax(logits)``."""
    labels = np.asarray(labels, dtype=np.int64)
    n, c = logits.shape
    if len(labels) != n:
        raise InputError("one label per logit row is required")
    if n == 0:
        raise InputError("cross_entropy of an empty batch")
    if labels.min() < 0 or labels.max() >= c:
        raise InputError(f"label outside [0, {c})")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logsum
    rows = np.arange(n)
    loss = -logp[rows, labels].mean()

    def back(g):
        d = np.exp(logp)
        d[rows, labels] -= 1.0
        return (d * (g[0, 0] / n),)

    return _make(np.array([[loss]], dtype=logits.data.dtype), (logits,), back, "cross_entropy")


def softmax_np(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)
