"""Training loop: cycle environments, update contexts and shared weights.

Each optimizer step visits one training environment, computes the
rollout loss on a minibatch of its trajectories, and updates that
environment's (c_e, beta_e) with step size alpha and the shared weights
with step size eta (alpha defaults to eta). The warmup+cosine schedule
advances per optimizer step. ERM-style runs reuse this loop with the
all-shared partition and a single frozen-zero context, so the two paths
produce identical loss sequences under the same configuration and seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..engine import Tensor, gradients
from ..errors import ConfigError, DivergenceError
from ..model import EnvContext, init_params, trainable_names
from ..optim import AdamState, LrSchedule, lr_at
from .checkpoint import Checkpoint, save_checkpoint
from .loss import rollout_loss


@dataclass
class TrainSettings:
    steps: int
    lr: float
    weight_decay: float
    lr_context: float | None = None  # alpha; defaults to lr (eta)
    warmup_steps: int = 500
    batch_traj: int = 16
    starts_per_traj: int | None = None  # None: every observed start
    horizon_steps: int = 1
    lam: float = 1e-4
    reg: str = "l2"

    @property
    def alpha(self):
        return self.lr_context if self.lr_context is not None else self.lr


@dataclass
class TrainRun:
    params: dict
    contexts: list
    loss_history: list = field(default_factory=list)
    seed: int = 0

    def mean_context(self, config):
        ctx = EnvContext.fresh(config)
        if self.contexts:
            ctx.c.data[:] = np.mean([c.c.data for c in self.contexts], axis=0)
            ctx.beta.data[:] = np.mean([c.beta.data for c in self.contexts], axis=0)
        return ctx


def _train_env_indices(bundle):
    return [i for i, trajs in enumerate(bundle.train) if trajs]


def train(bundle, model_config, settings, seed, interrupt_path=None):
    """Run the training loop; returns (Checkpoint, TrainRun)."""
    env_indices = _train_env_indices(bundle)
    if not env_indices:
        raise ConfigError("dataset has no training trajectories")
    model_config.init_seed = seed
    params = init_params(model_config)
    theta = {name: params[name] for name in trainable_names(model_config)}

    if model_config.contexts_enabled:
        contexts = [EnvContext.fresh(model_config, env_id=e) for e in env_indices]
    else:
        shared = EnvContext.fresh(model_config, env_id=-1)
        shared.c.requires_grad = False
        contexts = [shared for _ in env_indices]

    schedule = LrSchedule(settings.lr, settings.warmup_steps, max(settings.steps, 1))
    schedule_a = LrSchedule(settings.alpha, settings.warmup_steps, max(settings.steps, 1))
    opt_theta = AdamState(lr=settings.lr, weight_decay=settings.weight_decay)
    opt_beta = [AdamState(lr=settings.lr) for _ in env_indices]
    opt_c = [AdamState(lr=settings.alpha) for _ in env_indices]
    if not model_config.contexts_enabled:
        # one optimizer state for the shared slope
        opt_beta = [opt_beta[0] for _ in env_indices]

    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(7,)))
    run = TrainRun(params=params, contexts=contexts, seed=seed)

    try:
        for step in range(settings.steps):
            slot = step % len(env_indices)
            env = env_indices[slot]
            ctx = contexts[slot]
            trajs = bundle.train[env]
            take = min(settings.batch_traj, len(trajs))
            picked = np.sort(rng.choice(len(trajs), size=take, replace=False))
            states = np.stack([trajs[i].states for i in picked])
            dt = trajs[0].dt
            n_starts = states.shape[1] - settings.horizon_steps
            if settings.starts_per_traj is not None and settings.starts_per_traj < n_starts:
                starts = np.sort(
                    rng.choice(n_starts, size=settings.starts_per_traj, replace=False)
                )
            else:
                starts = None
            loss = rollout_loss(
                params,
                ctx,
                states,
                dt,
                model_config,
                model_config.family,
                lam=settings.lam,
                reg=settings.reg,
                horizon_steps=settings.horizon_steps,
                starts=starts,
            )
            loss_val = loss.item()
            if not np.isfinite(loss_val):
                raise DivergenceError(f"non-finite loss at step {step} (env {env})")
            group = dict(theta)
            if model_config.contexts_enabled:
                group["__ctx.c"] = ctx.c
            group["__ctx.beta"] = ctx.beta
            grads = gradients(loss, group)
            lr = lr_at(schedule, step)
            opt_theta.step(theta, {k: grads[k] for k in theta}, lr)
            if model_config.contexts_enabled:
                opt_c[slot].step({"c": ctx.c}, {"c": grads["__ctx.c"]}, lr_at(schedule_a, step))
            opt_beta[slot].step({"beta": ctx.beta}, {"beta": grads["__ctx.beta"]}, lr)
            run.loss_history.append(loss_val)
    except KeyboardInterrupt:
        if interrupt_path:
            save_checkpoint(_to_checkpoint(run, model_config), interrupt_path)
        raise
    return _to_checkpoint(run, model_config), run


def _to_checkpoint(run, model_config):
    ckpt = Checkpoint(config=model_config, params=run.params)
    if model_config.contexts_enabled:
        ckpt.contexts = {c.env_id: c for c in run.contexts}
    ckpt.mean_context = run.mean_context(model_config)
    if not model_config.contexts_enabled and run.contexts:
        # the ERM model's single slope persists through the mean slot
        ckpt.mean_context.beta.data[:] = run.contexts[0].beta.data
    hist = run.loss_history
    ckpt.meta = {
        "steps": float(len(hist)),
        "seed": float(run.seed),
        "loss_first": hist[0] if hist else float("nan"),
        "loss_last": hist[-1] if hist else float("nan"),
    }
    return ckpt


def baseline_train_erm(bundle, model_config, settings, seed, interrupt_path=None):
    """Plain pooled-FNO baseline: all modes shared, no contexts."""
    from dataclasses import replace

    erm_config = replace(model_config, partition="all_shared", contexts_enabled=False)
    return train(bundle, erm_config, settings, seed, interrupt_path)
