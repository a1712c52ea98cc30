"""Adam with decoupled weight decay, plus a cosine-annealing learning-rate
schedule with warm restarts.

The same update rule serves two purposes: descending the training
objective over network parameters and ascending log D over an input
vector (``maximize=True``). Weight decay is decoupled from the gradient
(applied directly to the variables before the Adam delta) and is never
used for input-space ascent, where shrinking the iterate toward zero
would corrupt generation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .backend import ADAM_BETA1, ADAM_BETA2, ADAM_EPS
from .errors import ConfigError, NumericError


@dataclass
class AdamState:
    """First/second moment estimates for one flat variable vector."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def for_vars(cls, variables: np.ndarray) -> "AdamState":
        return cls(np.zeros_like(variables), np.zeros_like(variables))


@dataclass(frozen=True)
class LrSchedule:
    base_lr: float = 1e-4
    min_lr: float = 0.0
    restart_period_epochs: int = 10
    weight_decay: float = 1e-5

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ConfigError(f"base_lr must be > 0, got {self.base_lr}")
        if self.restart_period_epochs < 1:
            raise ConfigError("restart_period_epochs must be >= 1")
        if not 0 <= self.min_lr <= self.base_lr:
            raise ConfigError("need 0 <= min_lr <= base_lr")


def adam_step(
    state: AdamState,
    variables: np.ndarray,
    grads: np.ndarray,
    lr: float,
    weight_decay: float = 0.0,
    maximize: bool = False,
) -> None:
    """One bias-corrected Adam update, in place.

        m <- b1*m + (1-b1)*g          v <- b2*v + (1-b2)*g^2
        vars <- vars - lr*wd*vars     (decoupled decay, before the delta)
        vars <- vars - lr * (m/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps)

    ``maximize`` negates the gradient first, which mirrors the minimizing
    update on -g exactly.
    """
    if variables.shape != grads.shape or variables.shape != state.first_moment.shape:
        raise ConfigError(
            f"shape mismatch: vars {variables.shape}, grads {grads.shape}, "
            f"moments {state.first_moment.shape}"
        )
    if lr <= 0:
        raise ConfigError(f"lr must be > 0, got {lr}")
    if not np.all(np.isfinite(grads)):
        raise NumericError("non-finite gradient entries in adam_step")

    g = -grads if maximize else grads
    state.step_count += 1
    t = state.step_count
    m, v = state.first_moment, state.second_moment
    m *= state.beta1
    m += (1.0 - state.beta1) * g
    v *= state.beta2
    v += (1.0 - state.beta2) * g * g
    if weight_decay != 0.0:
        variables -= lr * weight_decay * variables
    mh = m / (1.0 - state.beta1**t)
    vh = v / (1.0 - state.beta2**t)
    variables -= lr * mh / (np.sqrt(vh) + state.eps)


def cosine_lr(schedule: LrSchedule, epoch: int) -> float:
    """Cosine-annealed learning rate, restarting at base_lr every
    ``restart_period_epochs`` epochs."""
    if epoch < 0:
        raise ConfigError(f"epoch must be >= 0, got {epoch}")
    period = schedule.restart_period_epochs
    phase = (epoch % period) / period
    return schedule.min_lr + 0.5 * (schedule.base_lr - schedule.min_lr) * (
        1.0 + math.cos(math.pi * phase)
    )
