"""Adaptation to an unseen environment: update only (c_e, beta_e).

The context starts from the training means, the shared weights stay
frozen (verified by digest), and the same rollout loss is minimized
with Adam under a cosine schedule without warmup. Inter-trajectory
adaptation sees exactly one full trajectory; extra-trajectory
adaptation sees the [0, T_ad] prefix of every trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..engine import gradients
from ..errors import DivergenceError, UsageError
from ..model import count_adapted_params, count_params
from ..optim import AdamState, LrSchedule, lr_at
from .checkpoint import params_digest
from .loss import rollout_loss

TASKS = ("inter", "extra")


@dataclass
class AdaptSettings:
    steps: int
    lr: float
    lr_context: float | None = None
    lam: float = 1e-4
    reg: str = "l2"
    horizon_steps: int = 1

    @property
    def alpha(self):
        return self.lr_context if self.lr_context is not None else self.lr


@dataclass
class AdaptResult:
    context: object
    env_index: int
    updated_scalars: int
    digest_before: str
    digest_after: str
    loss_history: list = field(default_factory=list)

    @property
    def frozen_intact(self):
        return self.digest_before == self.digest_after


def adaptation_states(trajectories, task, adapt_frames=None):
    """The observed array a task exposes for parameter updating."""
    if task not in TASKS:
        raise UsageError(f"unknown adaptation task {task!r}")
    if task == "inter":
        if len(trajectories) != 1:
            raise UsageError(
                f"inter-trajectory adaptation uses exactly 1 trajectory, got {len(trajectories)}"
            )
        return np.stack([t.states for t in trajectories])
    if adapt_frames is None:
        raise UsageError("extra-trajectory adaptation needs the prefix length")
    if adapt_frames < 1:
        raise UsageError(f"adaptation prefix of {adapt_frames} frames is too short")
    return np.stack([t.states[: adapt_frames + 1] for t in trajectories])


def adapt(checkpoint, trajectories, task, settings, adapt_frames=None, env_index=-1):
    """Fit a fresh context on the adaptation data of one environment."""
    config = checkpoint.config
    params = checkpoint.params
    for p in params.values():
        p.requires_grad = False
    digest_before = params_digest(params)

    states = adaptation_states(trajectories, task, adapt_frames)
    dt = trajectories[0].dt
    if states.shape[1] - 1 < settings.horizon_steps:
        raise UsageError(
            f"adaptation data has {states.shape[1] - 1} steps, "
            f"needs >= {settings.horizon_steps}"
        )

    ctx = checkpoint.mean_context.clone(trainable=True)
    ctx.env_id = env_index
    schedule = LrSchedule(settings.lr, 0, max(settings.steps, 1))
    schedule_a = LrSchedule(settings.alpha, 0, max(settings.steps, 1))
    opt_c = AdamState(lr=settings.alpha)
    opt_beta = AdamState(lr=settings.lr)
    result = AdaptResult(
        context=ctx,
        env_index=env_index,
        updated_scalars=count_adapted_params(config),
        digest_before=digest_before,
        digest_after=digest_before,
    )
    for step in range(settings.steps):
        loss = rollout_loss(
            params,
            ctx,
            states,
            dt,
            config,
            config.family,
            lam=settings.lam,
            reg=settings.reg,
            horizon_steps=settings.horizon_steps,
        )
        loss_val = loss.item()
        if not np.isfinite(loss_val):
            raise DivergenceError(f"non-finite adaptation loss at step {step}")
        grads = gradients(loss, {"c": ctx.c, "beta": ctx.beta})
        opt_c.step({"c": ctx.c}, {"c": grads["c"]}, lr_at(schedule_a, step))
        opt_beta.step({"beta": ctx.beta}, {"beta": grads["beta"]}, lr_at(schedule, step))
        result.loss_history.append(loss_val)
    result.digest_after = params_digest(params)
    return result


def baseline_adapt_full(checkpoint, trajectories, task, settings, adapt_frames=None):
    """ERM-adp: fine-tune every parameter on the adaptation data."""
    config = checkpoint.config
    params = checkpoint.params
    for p in params.values():
        p.requires_grad = True
    states = adaptation_states(trajectories, task, adapt_frames)
    dt = trajectories[0].dt
    ctx = checkpoint.mean_context.clone(trainable=True)
    schedule = LrSchedule(settings.lr, 0, max(settings.steps, 1))
    opt = AdamState(lr=settings.lr)
    group = dict(params)
    group["__ctx.c"] = ctx.c
    group["__ctx.beta"] = ctx.beta
    history = []
    for step in range(settings.steps):
        loss = rollout_loss(
            params, ctx, states, dt, config, config.family,
            lam=settings.lam, reg=settings.reg, horizon_steps=settings.horizon_steps,
        )
        history.append(loss.item())
        if not np.isfinite(history[-1]):
            raise DivergenceError(f"non-finite fine-tune loss at step {step}")
        grads = gradients(loss, group)
        opt.step(group, grads, lr_at(schedule, step))
    updated = count_params(params) + ctx.c.size + ctx.beta.size
    return ctx, updated, history
