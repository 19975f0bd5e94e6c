"""Reverse-mode autodiff tape over float64 numpy arrays, plus loss heads,
gradient checking, parameter updates, and the binary checkpoint format."""

from cifbias.numerics.tensor import (
    GraphError,
    Tensor,
    abs_,
    add,
    concat,
    constant,
    embedding,
    matmul,
    mean,
    mul,
    offset,
    parameter,
    relu,
    scale,
    sigmoid,
    softmax,
    sub,
    sum_,
    tanh,
    transpose,
)
from cifbias.numerics.losses import cosine, label_smoothed_ce, rows_cosine
from cifbias.numerics.rnn import rnn_tanh
from cifbias.numerics.gradcheck import grad_check
from cifbias.numerics.checkpoint import load_params, save_params
from cifbias.numerics.optim import Adam, sgd_step, zero_grad

__all__ = [
    "Adam",
    "GraphError",
    "Tensor",
    "abs_",
    "add",
    "concat",
    "constant",
    "cosine",
    "embedding",
    "grad_check",
    "label_smoothed_ce",
    "load_params",
    "matmul",
    "mean",
    "mul",
    "offset",
    "parameter",
    "relu",
    "rnn_tanh",
    "rows_cosine",
    "save_params",
    "scale",
    "sgd_step",
    "sigmoid",
    "softmax",
    "sub",
    "sum_",
    "tanh",
    "transpose",
    "zero_grad",
]
