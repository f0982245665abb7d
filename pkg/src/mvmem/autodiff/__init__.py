"""Minimal reverse-mode differentiation over float64 numpy storage."""

from mvmem.autodiff.params import Adam, ParamStore, load_checkpoint, save_checkpoint
from mvmem.autodiff.tensor import (
    Tensor,
    abs_,
    add,
    add_row,
    add_scalar,
    as_tensor,
    backward,
    concat,
    cosine_similarity,
    exp,
    layer_norm,
    log_softmax,
    matmul,
    mean,
    mul,
    no_grad,
    pick,
    relu,
    reshape,
    row_cosine,
    row_norm,
    scale,
    slice_rows,
    softmax,
    softmax_cross_entropy,
    square,
    sub,
    sub_row,
    sum_,
)

__all__ = [
    "Adam",
    "ParamStore",
    "Tensor",
    "abs_",
    "add",
    "add_row",
    "add_scalar",
    "as_tensor",
    "backward",
    "concat",
    "cosine_similarity",
    "exp",
    "layer_norm",
    "load_checkpoint",
    "log_softmax",
    "matmul",
    "mean",
    "mul",
    "no_grad",
    "pick",
    "relu",
    "reshape",
    "row_cosine",
    "row_norm",
    "save_checkpoint",
    "scale",
    "slice_rows",
    "softmax",
    "softmax_cross_entropy",
    "square",
    "sub",
    "sub_row",
    "sum_",
]
