"""Minimal float64 tensor algebra with tape-based reverse-mode gradients."""
from .nn import GRUCell, Linear, MLP, Module, one_hot
from .optim import Adam, clip_grad_norm
from .tensor import (
    NonFiniteError,
    ShapeError,
    Tape,
    Tensor,
    as_tensor,
    backward,
    concat,
    current_tape,
    elu,
    exp,
    less_mask,
    log,
    new_tape,
    no_grad,
    relu,
    sigmoid,
    softmax,
    stack,
    take_along,
    tanh,
    where,
)

__all__ = [
    "Adam", "GRUCell", "Linear", "MLP", "Module", "NonFiniteError", "ShapeError",
    "Tape", "Tensor", "as_tensor", "backward", "clip_grad_norm", "concat",
    "current_tape", "elu", "exp", "less_mask", "log", "new_tape", "no_grad",
    "one_hot", "relu", "sigmoid", "softmax", "stack", "take_along", "tanh", "where",
]
