"""Minimal reverse-mode automatic differentiation for the GAN and CNN models."""

from .nn import Conv1d, Dense, GruCell, Module, RecurrentNet, gru_sequence, gru_step, uniform_init
from .optim import Adam, AdamState, adam_step
from .tensor import (
    Tensor,
    abs_,
    add,
    as_tensor,
    bce_loss,
    concat_time,
    conv1d,
    global_mean_over_time,
    matmul,
    mean,
    mse_loss,
    mul,
    no_grad,
    relu,
    reshape,
    sigmoid,
    slice_time,
    sqrt,
    square,
    sub,
    sum_,
    tanh,
)

__all__ = [
    "Adam", "AdamState", "Conv1d", "Dense", "GruCell", "Module", "RecurrentNet", "Tensor",
    "abs_", "adam_step", "add", "as_tensor", "bce_loss", "concat_time", "conv1d",
    "global_mean_over_time", "gru_sequence", "gru_step", "matmul", "mean", "mse_loss", "mul",
    "no_grad", "relu", "reshape", "sigmoid", "slice_time", "sqrt", "square", "sub", "sum_",
    "tanh", "uniform_init",
]
