"""adaaug: sample-adaptive data augmentation trained with an actor-critic.

A target CNN is trained while a small policy network assigns each training
sample a continuous augmentation magnitude in [0,1], using feedback from
three per-sample loss readings (clean, adaptively augmented, fully
augmented). Everything runs on a numpy float64 autodiff core.
"""

__version__ = "0.1.0"

from . import numcore
from .errors import (
    CheckpointError,
    ConfigurationError,
    ContractError,
    DataFormatError,
    DegenerateInputError,
    RangeError,
    ShapeError,
)

__all__ = [
    "numcore",
    "CheckpointError",
    "ConfigurationError",
    "ContractError",
    "DataFormatError",
    "DegenerateInputError",
    "RangeError",
    "ShapeError",
    "__version__",
]
