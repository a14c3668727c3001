"""The two evaluation tasks: adapt to each unseen environment, roll the
surrogate out with the family solver, and score against the truth.

The surrogate rolls out on the recording grid with the same solver the
loss uses (RK4 for the ODE/reaction families, Euler for NS); the ground
truth generator's internal substeps apply only to data generation. The
oracle model plugs the true right-hand side into the identical rollout
machinery, which the self-consistency tests rely on.
"""

from __future__ import annotations

import time

import numpy as np

from ..engine import Tensor, no_grad
from ..dynamics.integrators import euler_step, rk4_step
from ..dynamics.systems import go_rhs, gs_rhs, lv_rhs
from ..model import count_adapted_params, model_forward
from ..pipelines.adapt import adapt
from .metrics import MetricsReport, TrajectoryRow, mape_per_traj, rmse_per_traj


def _solver(family):
    return euler_step if family == "ns" else rk4_step


class SurrogateModel:
    """Checkpointed model exposing adaptation and rollout."""

    def __init__(self, checkpoint):
        self.checkpoint = checkpoint
        self.config = checkpoint.config

    @property
    def family(self):
        return self.config.family

    def adapt_to(self, trajectories, task, settings, adapt_frames=None, env_index=-1):
        result = adapt(
            self.checkpoint,
            trajectories,
            task,
            settings,
            adapt_frames=adapt_frames,
            env_index=env_index,
        )
        return result.context, result

    def adapted_count(self):
        return count_adapted_params(self.config)

    def rollout(self, u0, ctx, dt, n_steps):
        """Frames [n_steps+1, B, ...]; divergent entries turn nan."""
        step = _solver(self.family)
        frames = np.empty((n_steps + 1,) + u0.shape)
        frames[0] = u0
        u = Tensor(u0)
        with no_grad(), np.errstate(all="ignore"):
            for j in range(1, n_steps + 1):
                u = step(lambda s: model_forward(s, ctx, self.checkpoint.params, self.config), u, dt)
                data = u.data
                bad = ~np.isfinite(data.reshape(data.shape[0], -1)).all(axis=1)
                if bad.any():
                    data = data.copy()
                    data[bad] = np.nan
                    u = Tensor(data)
                frames[j] = data
        return frames


class OracleModel:
    """Ground-truth right-hand side behind the surrogate interface."""

    def __init__(self, spec):
        self.spec = spec

    @property
    def family(self):
        return self.spec.family

    def adapt_to(self, trajectories, task, settings, adapt_frames=None, env_index=-1):
        return None, None

    def adapted_count(self):
        return 0

    def _rhs(self, u):
        p = self.spec.params
        if self.spec.family == "lv":
            return lv_rhs(u, p["alpha"], p["beta"], p["gamma"], p["delta"])
        if self.spec.family == "go":
            return go_rhs(u, p)
        if self.spec.family == "gs":
            inv_ds2 = 1.0 / self.spec.grid_spacing**2
            return gs_rhs(u, p["D_u"], p["D_v"], p["F"], p["k"], inv_ds2)
        raise NotImplementedError(f"oracle rollout for {self.spec.family}")

    def rollout(self, u0, ctx, dt, n_steps):
        step = _solver(self.family)
        frames = np.empty((n_steps + 1,) + u0.shape)
        frames[0] = u0
        u = u0
        for j in range(1, n_steps + 1):
            u = step(self._rhs, u, dt)
            frames[j] = u
        return frames


def _score_env(report, model, ctx, trajs, traj_indices, start_frame, dt):
    """Roll out each trajectory from ``start_frame`` and score the rest."""
    u0 = np.stack([t.states[start_frame] for t in trajs])
    n_steps = trajs[0].states.shape[0] - 1 - start_frame
    pred = model.rollout(u0, ctx, dt, n_steps)
    for slot, (traj, tix) in enumerate(zip(trajs, traj_indices)):
        p = pred[1:, slot]
        t = traj.states[start_frame + 1 :]
        divergent = not np.all(np.isfinite(p))
        if divergent:
            row = TrajectoryRow(traj.env_index, tix, float("nan"), float("nan"), True)
        else:
            row = TrajectoryRow(traj.env_index, tix, rmse_per_traj(p, t), mape_per_traj(p, t))
        report.rows.append(row)


def run_inter_trajectory(model, bundle, settings, run_id="run", config_digest=""):
    """Adapt on trajectory 0 of each eval environment over [0, T], then
    predict the remaining trajectories from their initial states."""
    t0 = time.perf_counter()
    report = MetricsReport(
        run_id=run_id,
        family=bundle.environment_set.family,
        task="inter",
        adapted_params=model.adapted_count(),
        config_digest=config_digest,
    )
    for env_index, trajs in enumerate(bundle.eval):
        if not trajs:
            continue
        ctx, _ = model.adapt_to(trajs[:1], "inter", settings, env_index=env_index)
        _score_env(
            report,
            model,
            ctx,
            trajs[1:],
            range(1, len(trajs)),
            start_frame=0,
            dt=trajs[0].dt,
        )
    report.wall_ms = (time.perf_counter() - t0) * 1e3
    return report


def run_extra_trajectory(model, bundle, settings, run_id="run", config_digest=""):
    """Adapt on every trajectory's [0, T_ad] prefix, then predict
    (T_ad, T] from the state at T_ad; scored on that window only."""
    t0 = time.perf_counter()
    env_set = bundle.environment_set
    report = MetricsReport(
        run_id=run_id,
        family=env_set.family,
        task="extra",
        adapted_params=model.adapted_count(),
        config_digest=config_digest,
    )
    for env_index, trajs in enumerate(bundle.eval):
        if not trajs:
            continue
        spec = env_set.all_envs[env_index]
        n_ad = int(round(spec.adapt_horizon / spec.dt))
        ctx, _ = model.adapt_to(
            trajs, "extra", settings, adapt_frames=n_ad, env_index=env_index
        )
        _score_env(
            report,
            model,
            ctx,
            trajs,
            range(len(trajs)),
            start_frame=n_ad,
            dt=trajs[0].dt,
        )
    report.wall_ms = (time.perf_counter() - t0) * 1e3
    return report
