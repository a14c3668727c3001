"""Adam with decoupled weight decay, and the warmup+cosine schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params, grads, lr=None):
        """One update over a name -> Tensor dict given matching grads.

        Decoupled weight decay shrinks the parameter before the Adam
        delta; the loss's own regularizer stays independent of it.
        """
        lr = self.lr if lr is None else lr
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for name, p in params.items():
            g = grads[name]
            if g.shape != p.data.shape:
                raise ShapeError(f"adam: grad {g.shape} != param {p.data.shape} for {name}")
            if name not in self.m:
                self.m[name] = np.zeros_like(p.data)
                self.v[name] = np.zeros_like(p.data)
            if self.weight_decay:
                p.data -= lr * self.weight_decay * p.data
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def adam_step(state, params, grads, lr=None):
    state.step(params, grads, lr)
    return params


@dataclass
class LrSchedule:
    base_lr: float
    warmup_steps: int
    total_steps: int
    min_lr: float = 0.0

    def __post_init__(self):
        if self.warmup_steps > self.total_steps:
            raise ConfigError(
                f"warmup {self.warmup_steps} exceeds total steps {self.total_steps}"
            )


def lr_at(schedule, step):
    """Linear ramp to base_lr over warmup, then cosine to min_lr."""
    if step < 0 or step > schedule.total_steps:
        raise ConfigError(f"step {step} outside [0, {schedule.total_steps}]")
    if schedule.warmup_steps > 0 and step <= schedule.warmup_steps:
        return schedule.base_lr * step / schedule.warmup_steps
    span = schedule.total_steps - schedule.warmup_steps
    progress = (step - schedule.warmup_steps) / span if span > 0 else 1.0
    return schedule.min_lr + 0.5 * (schedule.base_lr - schedule.min_lr) * (
        1.0 + math.cos(math.pi * progress)
    )


# Family defaults for the optimizer; training and adaptation share the
# same base step size (the context step alpha defaults to eta).
OPT_DEFAULTS = {
    "lv": dict(lr=5e-4, weight_decay=1e-4),
    "go": dict(lr=1e-3, weight_decay=5e-4),
    "gs": dict(lr=1e-3, weight_decay=5e-4),
    "ns": dict(lr=5e-4, weight_decay=1e-4),
}

TRAIN_WARMUP_STEPS = 500
