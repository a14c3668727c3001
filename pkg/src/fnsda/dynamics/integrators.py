"""Fixed-step integrators, generic over numpy arrays and engine tensors."""

from __future__ import annotations

import numpy as np

from ..errors import IntegrationError


def rk4_step(rhs, state, dt, t=0.0):
    """Classical 4-stage Runge-Kutta update.

    Works on anything supporting + and scalar *: numpy arrays and the
    engine's Tensor both qualify (the loss rollout differentiates
    through these exact expressions).
    """
    k1 = rhs(state)
    k2 = rhs(state + k1 * (0.5 * dt))
    k3 = rhs(state + k2 * (0.5 * dt))
    k4 = rhs(state + k3 * dt)
    out = state + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
    _check(out, t, dt, "rk4_step")
    return out


def euler_step(rhs, state, dt, t=0.0):
    out = state + rhs(state) * dt
    _check(out, t, dt, "euler_step")
    return out


def _check(out, t, dt, name):
    if isinstance(out, np.ndarray) and not np.all(np.isfinite(out)):
        raise IntegrationError(f"{name}: non-finite state at t={t + dt:g}")


SOLVERS = {"lv": rk4_step, "go": rk4_step, "gs": rk4_step, "ns": euler_step}


def solver_for(family):
    return SOLVERS[family]
