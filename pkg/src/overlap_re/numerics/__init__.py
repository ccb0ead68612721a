"""Tensor arithmetic, reverse-mode gradients, gradient checking and Adam."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import grad_check, relative_error
from .optim import AdamState, adam_step
from .tensor import (
    DTYPE,
    ShapeError,
    Tensor,
    add,
    as_tensor,
    concat,
    cross_entropy,
    dropout,
    embedding,
    exp,
    gelu,
    getitem,
    layer_norm,
    log,
    log_softmax,
    matmul,
    mean,
    mul,
    no_grad,
    reshape,
    scale,
    softmax,
    softmax_cross_entropy,
    split,
    sub,
    tanh,
    tensor_sum,
    transpose,
)

__all__ = [
    "AdamState", "CheckpointError", "DTYPE", "ShapeError", "Tensor", "adam_step", "add",
    "as_tensor", "concat", "cross_entropy", "dropout", "embedding", "exp", "gelu", "getitem",
    "grad_check", "layer_norm", "load_checkpoint", "log", "log_softmax", "matmul", "mean",
    "mul", "no_grad", "relative_error", "reshape", "save_checkpoint", "scale", "softmax",
    "softmax_cross_entropy", "split", "sub", "tanh", "tensor_sum", "transpose",
]
