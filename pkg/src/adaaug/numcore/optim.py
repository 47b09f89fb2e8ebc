"""SGD with Nesterov momentum plus the two LR schedules used by the trainer."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, ContractError, RangeError
from .array import Array


class SGD:
    """Nesterov-momentum SGD over a fixed parameter list.

    step() applies, for each parameter p with gradient g:
        v <- mu*v + g + wd*p
        p <- p - lr*(g + wd*p + mu*v)
    then clears the gradient. With mu=0 this reduces to plain SGD; weight
    decay is coupled (folded into the gradient before the momentum buffer).
    """

    def __init__(self, params, lr: float, momentum: float = 0.0, weight_decay: float = 0.0):
        self.params = list(params)
        if lr <= 0:
            raise ConfigurationError(f"learning rate must be positive, got {lr}")
        if not 0.0 <= momentum < 1.0:
            raise ConfigurationError(f"momentum must be in [0,1), got {momentum}")
        if weight_decay < 0:
            raise ConfigurationError(f"weight decay must be nonnegative, got {weight_decay}")
        for p in self.params:
            if not isinstance(p, Array) or not p.requires_grad:
                raise ContractError("optimizer accepts trainable Arrays only")
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def step(self, lr: float | None = None):
        """One update over all parameters; lr argument overrides self.lr."""
        rate = self.lr if lr is None else lr
        for p, v in zip(self.params, self.velocity):
            if p.grad is None:
                raise ContractError("sgd step with missing grad; run backward first")
            g = p.grad + self.weight_decay * p.data
            v *= self.momentum
            v += g
            p.data -= rate * (g + self.momentum * v)
            p.grad = None


@dataclass(frozen=True)
class LrSchedule:
    """Per-epoch learning-rate rule; rate(t) valid for 0 <= t <= total."""

    kind: str  # "cosine" | "multi-step"
    base_rate: float
    total_epochs: int
    milestones: tuple = ()
    decay_factor: float = 0.2

    def __post_init__(self):
        if self.kind not in ("cosine", "multi-step"):
            raise ConfigurationError(f"unknown schedule kind {self.kind!r}")
        if self.base_rate <= 0:
            raise ConfigurationError(f"base rate must be positive, got {self.base_rate}")
        if self.total_epochs < 1:
            raise ConfigurationError(
                f"total epochs must be positive, got {self.total_epochs}"
            )

    @classmethod
    def cosine(cls, base_rate: float, total_epochs: int) -> "LrSchedule":
        return cls("cosine", base_rate, total_epochs)

    @classmethod
    def multi_step(
        cls, base_rate: float, total_epochs: int, milestones, decay_factor: float = 0.2
    ) -> "LrSchedule":
        return cls("multi-step", base_rate, total_epochs, tuple(milestones), decay_factor)

    def rate(self, epoch: int) -> float:
        if epoch < 0 or epoch > self.total_epochs:
            raise RangeError(
                f"epoch {epoch} outside schedule range [0, {self.total_epochs}]"
            )
        if self.kind == "cosine":
            return self.base_rate * 0.5 * (1.0 + math.cos(math.pi * epoch / self.total_epochs))
        hits = sum(1 for m in self.milestones if m <= epoch)
        return self.base_rate * self.decay_factor**hits


def schedule_lr(schedule: LrSchedule, epoch: int) -> float:
    return schedule.rate(epoch)
