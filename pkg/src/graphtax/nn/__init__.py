"""Minimal dense autodiff core used to train the GNN models."""

from .gradcheck import grad_check
from .optim import AdamState, ParamStore, adam_step, glorot
from .tensor import (
    Tensor,
    add,
    add_n,
    batchnorm,
    cross_entropy,
    dropout,
    gather_rows,
    leaky_relu,
    matmul,
    mul,
    relu,
    row_mean_pool,
    row_softmax,
    scale,
    segment_softmax,
    segment_sum,
    softmax_np,
    spmm,
    sub,
)

__all__ = [
    "AdamState",
    "ParamStore",
    "Tensor",
    "adam_step",
    "add",
    "add_n",
    "batchnorm",
    "cross_entropy",
    "dropout",
    "gather_rows",
    "glorot",
    "grad_check",
    "leaky_relu",
    "matmul",
    "mul",
    "relu",
    "row_mean_pool",
    "row_softmax",
    "scale",
    "segment_softmax",
    "segment_sum",
    "softmax_np",
    "spmm",
    "sub",
]
