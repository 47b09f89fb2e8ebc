"""Numeric core: float64 reverse-mode autodiff over numpy, SGD, LR schedules,
and the flat binary parameter container."""

from .array import (
    Array,
    as_array,
    no_grad,
    add,
    sub,
    mul,
    matmul,
    linear,
    conv2d,
    maxpool2d,
    relu,
    sigmoid,
    reshape,
    reduce_sum,
    reduce_mean,
    cross_entropy,
)
from .optim import SGD, LrSchedule, schedule_lr
from .checkpoint import save_tensors, load_tensors, CHECKPOINT_MAGIC

__all__ = [
    "Array",
    "as_array",
    "no_grad",
    "add",
    "sub",
    "mul",
    "matmul",
    "linear",
    "conv2d",
    "maxpool2d",
    "relu",
    "sigmoid",
    "reshape",
    "reduce_sum",
    "reduce_mean",
    "cross_entropy",
    "SGD",
    "LrSchedule",
    "schedule_lr",
    "save_tensors",
    "load_tensors",
    "CHECKPOINT_MAGIC",
]
