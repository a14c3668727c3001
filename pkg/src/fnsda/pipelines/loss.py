"""Teacher-forced rollout loss with gradients through the solver.

From every chosen observed state u(t_k), the surrogate derivative is
integrated ``horizon_steps`` recording intervals forward with the
family's solver, and the squared error against the following observed
states is averaged. The context norm penalty (L2 by default, L1 for the
sparsity ablation) is added on top.
"""

from __future__ import annotations

import numpy as np

from ..engine import Tensor, absolute, reduce_mean, reduce_sum
from ..dynamics.integrators import euler_step, rk4_step
from ..errors import ConfigError, DivergenceError, UsageError
from ..model import model_forward


def _solver(family):
    return euler_step if family == "ns" else rk4_step


def rollout_loss(
    params,
    ctx,
    states,
    dt,
    config,
    family,
    lam=1e-4,
    reg="l2",
    horizon_steps=1,
    starts=None,
):
    """Loss over a batch of trajectories.

    ``states``: [n_traj, n_frames+1, *state_shape] observed states.
    ``starts``: frame indices used as rollout origins (default: every
    frame that still has ``horizon_steps`` observed successors).
    """
    if horizon_steps < 1:
        raise UsageError(f"horizon_steps must be >= 1, got {horizon_steps}")
    n_frames = states.shape[1] - 1
    if horizon_steps > n_frames:
        raise UsageError(
            f"horizon_steps {horizon_steps} exceeds the {n_frames} observed steps"
        )
    if starts is None:
        starts = np.arange(n_frames - horizon_steps + 1)
    else:
        starts = np.asarray(starts, dtype=np.intp)
        if starts.size == 0 or starts.max() + horizon_steps > n_frames:
            raise UsageError("starts leave no observed target inside the trajectory")
    step = _solver(family)
    n_traj = states.shape[0]
    state_shape = states.shape[2:]
    u = Tensor(states[:, starts].reshape((n_traj * starts.size,) + state_shape))
    total = None
    for j in range(1, horizon_steps + 1):
        u = step(lambda s: model_forward(s, ctx, params, config), u, dt)
        if not np.all(np.isfinite(u.data)):
            raise DivergenceError(f"rollout diverged at horizon step {j}")
        target = states[:, starts + j].reshape(u.shape)
        diff = u - Tensor(target)
        term = reduce_mean(diff * diff)
        total = term if total is None else total + term
    data_term = total * (1.0 / horizon_steps)
    return data_term + context_penalty(ctx.c, lam, reg)


def context_penalty(c, lam, reg):
    if lam == 0.0:
        return Tensor(0.0)
    if reg == "l2":
        return reduce_sum(c * c) * lam
    if reg == "l1":
        return reduce_sum(absolute(c)) * lam
    raise ConfigError(f"unknown regularizer {reg!r}")


def trajectory_loss(params, ctx, trajectory, config, lam=1e-4, reg="l2", horizon_steps=1):
    """Single-trajectory form of the rollout loss."""
    return rollout_loss(
        params,
        ctx,
        trajectory.states[np.newaxis],
        trajectory.dt,
        config,
        config.family,
        lam=lam,
        reg=reg,
        horizon_steps=horizon_steps,
    )
