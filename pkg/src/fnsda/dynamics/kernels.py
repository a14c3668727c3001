"""Batched rollout kernels for the ODE/reaction-diffusion generators.

Each kernel exists twice: a numba ``@njit`` build and a pure-numpy
fallback with identical arithmetic. Selection is by the FNSDA_NUMBA
environment variable ("0" disables the jit path); both paths are
exercised against each other in the tests and in
``benchmarks/bench_kernels.py``. fastmath stays off so the two paths
agree to the last ulp-or-so and reruns are bitwise stable.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap


def numba_enabled():
    flag = os.environ.get("FNSDA_NUMBA", "1").strip().lower()
    return NUMBA_AVAILABLE and flag not in ("0", "false", "off")


# ---------------------------------------------------------------- LV --

def _rollout_lv_py(y0, alpha, beta, gamma, delta, printed, dt, substeps, n_frames):
    frames = np.empty((n_frames + 1,) + y0.shape)
    frames[0] = y0
    h = dt / substeps
    y = y0.copy()
    for f in range(1, n_frames + 1):
        for _ in range(substeps):
            k1 = _lv_f(y, alpha, beta, gamma, delta, printed)
            k2 = _lv_f(y + 0.5 * h * k1, alpha, beta, gamma, delta, printed)
            k3 = _lv_f(y + 0.5 * h * k2, alpha, beta, gamma, delta, printed)
            k4 = _lv_f(y + h * k3, alpha, beta, gamma, delta, printed)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        frames[f] = y
    return frames


def _lv_f(y, alpha, beta, gamma, delta, printed):
    x = y[..., 0]
    z = y[..., 1]
    dx = alpha * x - beta * x * z
    if printed:
        dz = delta * x - gamma * x * z
    else:
        dz = delta * x * z - gamma * z
    return np.stack([dx, dz], axis=-1)


@njit(cache=True)
def _rollout_lv_nb(y0, alpha, beta, gamma, delta, printed, dt, substeps, n_frames):
    n_traj = y0.shape[0]
    frames = np.empty((n_frames + 1, n_traj, 2))
    frames[0] = y0
    h = dt / substeps
    for b in range(n_traj):
        x = y0[b, 0]
        z = y0[b, 1]
        for f in range(1, n_frames + 1):
            for _ in range(substeps):
                k1x = alpha * x - beta * x * z
                k1z = delta * x * z - gamma * z if not printed else delta * x - gamma * x * z
                x1 = x + 0.5 * h * k1x
                z1 = z + 0.5 * h * k1z
                k2x = alpha * x1 - beta * x1 * z1
                k2z = delta * x1 * z1 - gamma * z1 if not printed else delta * x1 - gamma * x1 * z1
                x2 = x + 0.5 * h * k2x
                z2 = z + 0.5 * h * k2z
                k3x = alpha * x2 - beta * x2 * z2
                k3z = delta * x2 * z2 - gamma * z2 if not printed else delta * x2 - gamma * x2 * z2
                x3 = x + h * k3x
                z3 = z + h * k3z
                k4x = alpha * x3 - beta * x3 * z3
                k4z = delta * x3 * z3 - gamma * z3 if not printed else delta * x3 - gamma * x3 * z3
                x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
                z = z + (h / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
            frames[f, b, 0] = x
            frames[f, b, 1] = z
    return frames


# ---------------------------------------------------------------- GO --

GO_PARAM_ORDER = (
    "J0", "k1", "k2", "k3", "k4", "k5", "k6", "K1", "q", "N", "A", "kappa", "psi", "k",
)


def go_param_vector(params):
    return np.array([params[name] for name in GO_PARAM_ORDER])


@njit(cache=True)
def _go_f_nb(s, p, out):
    v1 = p[1] * s[0] * s[5] / (1.0 + (s[5] / p[7]) ** p[8])
    t26 = p[2] * s[1] * (p[9] - s[4])
    t36 = p[3] * s[2] * (p[10] - s[5])
    t45 = p[4] * s[3] * s[4]
    t25 = p[6] * s[1] * s[4]
    out[0] = p[0] - v1
    out[1] = 2.0 * v1 - t26 - t25
    out[2] = t26 - t36
    out[3] = t36 - t45 - p[11] * (s[3] - s[6])
    out[4] = t26 - t45 - t25
    out[5] = -2.0 * v1 + 2.0 * t36 - p[5] * s[5]
    out[6] = p[12] * p[11] * (s[3] - s[6]) - p[13] * s[6]


@njit(cache=True)
def _rollout_go_nb(y0, p, dt, substeps, n_frames):
    n_traj = y0.shape[0]
    frames = np.empty((n_frames + 1, n_traj, 7))
    frames[0] = y0
    h = dt / substeps
    y = np.empty(7)
    tmp = np.empty(7)
    k1 = np.empty(7)
    k2 = np.empty(7)
    k3 = np.empty(7)
    k4 = np.empty(7)
    for b in range(n_traj):
        for i in range(7):
            y[i] = y0[b, i]
        for f in range(1, n_frames + 1):
            for _ in range(substeps):
                _go_f_nb(y, p, k1)
                for i in range(7):
                    tmp[i] = y[i] + 0.5 * h * k1[i]
                _go_f_nb(tmp, p, k2)
                for i in range(7):
                    tmp[i] = y[i] + 0.5 * h * k2[i]
                _go_f_nb(tmp, p, k3)
                for i in range(7):
                    tmp[i] = y[i] + h * k3[i]
                _go_f_nb(tmp, p, k4)
                for i in range(7):
                    y[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            for i in range(7):
                frames[f, b, i] = y[i]
    return frames


def _go_f_py(s, p):
    v1 = p[1] * s[..., 0] * s[..., 5] / (1.0 + (s[..., 5] / p[7]) ** p[8])
    t26 = p[2] * s[..., 1] * (p[9] - s[..., 4])
    t36 = p[3] * s[..., 2] * (p[10] - s[..., 5])
    t45 = p[4] * s[..., 3] * s[..., 4]
    t25 = p[6] * s[..., 1] * s[..., 4]
    return np.stack(
        [
            p[0] - v1,
            2.0 * v1 - t26 - t25,
            t26 - t36,
            t36 - t45 - p[11] * (s[..., 3] - s[..., 6]),
            t26 - t45 - t25,
            -2.0 * v1 + 2.0 * t36 - p[5] * s[..., 5],
            p[12] * p[11] * (s[..., 3] - s[..., 6]) - p[13] * s[..., 6],
        ],
        axis=-1,
    )


def _rollout_go_py(y0, p, dt, substeps, n_frames):
    frames = np.empty((n_frames + 1,) + y0.shape)
    frames[0] = y0
    h = dt / substeps
    y = y0.copy()
    for f in range(1, n_frames + 1):
        for _ in range(substeps):
            k1 = _go_f_py(y, p)
            k2 = _go_f_py(y + 0.5 * h * k1, p)
            k3 = _go_f_py(y + 0.5 * h * k2, p)
            k4 = _go_f_py(y + h * k3, p)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        frames[f] = y
    return frames


# ---------------------------------------------------------------- GS --

@njit(cache=True)
def _gs_f_nb(state, d_u, d_v, f_rate, k_rate, inv_ds2, out):
    h, w = state.shape[1], state.shape[2]
    for c in range(2):
        for i in range(h):
            up = i - 1 if i > 0 else h - 1
            dn = i + 1 if i < h - 1 else 0
            for j in range(w):
                lf = j - 1 if j > 0 else w - 1
                rt = j + 1 if j < w - 1 else 0
                lap = inv_ds2 * (
                    state[c, up, j]
                    + state[c, dn, j]
                    + state[c, i, lf]
                    + state[c, i, rt]
                    - 4.0 * state[c, i, j]
                )
                u = state[0, i, j]
                v = state[1, i, j]
                uvv = u * v * v
                if c == 0:
                    out[0, i, j] = d_u * lap - uvv + f_rate * (1.0 - u)
                else:
                    out[1, i, j] = d_v * lap + uvv - (f_rate + k_rate) * v


@njit(cache=True)
def _rollout_gs_nb(y0, d_u, d_v, f_rate, k_rate, inv_ds2, dt, substeps, n_frames):
    n_traj, _, h, w = y0.shape
    frames = np.empty((n_frames + 1, n_traj, 2, h, w))
    frames[0] = y0
    step = dt / substeps
    y = np.empty((2, h, w))
    tmp = np.empty((2, h, w))
    k1 = np.empty((2, h, w))
    k2 = np.empty((2, h, w))
    k3 = np.empty((2, h, w))
    k4 = np.empty((2, h, w))
    for b in range(n_traj):
        y[:] = y0[b]
        for f in range(1, n_frames + 1):
            for _ in range(substeps):
                _gs_f_nb(y, d_u, d_v, f_rate, k_rate, inv_ds2, k1)
                for c in range(2):
                    for i in range(h):
                        for j in range(w):
                            tmp[c, i, j] = y[c, i, j] + 0.5 * step * k1[c, i, j]
                _gs_f_nb(tmp, d_u, d_v, f_rate, k_rate, inv_ds2, k2)
                for c in range(2):
                    for i in range(h):
                        for j in range(w):
                            tmp[c, i, j] = y[c, i, j] + 0.5 * step * k2[c, i, j]
                _gs_f_nb(tmp, d_u, d_v, f_rate, k_rate, inv_ds2, k3)
                for c in range(2):
                    for i in range(h):
                        for j in range(w):
                            tmp[c, i, j] = y[c, i, j] + step * k3[c, i, j]
                _gs_f_nb(tmp, d_u, d_v, f_rate, k_rate, inv_ds2, k4)
                for c in range(2):
                    for i in range(h):
                        for j in range(w):
                            y[c, i, j] = y[c, i, j] + (step / 6.0) * (
                                k1[c, i, j]
                                + 2.0 * k2[c, i, j]
                                + 2.0 * k3[c, i, j]
                                + k4[c, i, j]
                            )
            frames[f, b] = y
    return frames


def _gs_f_py(state, d_u, d_v, f_rate, k_rate, inv_ds2):
    u = state[..., 0, :, :]
    v = state[..., 1, :, :]

    def lap(z):
        return inv_ds2 * (
            np.roll(z, 1, axis=-2)
            + np.roll(z, -1, axis=-2)
            + np.roll(z, 1, axis=-1)
            + np.roll(z, -1, axis=-1)
            - 4.0 * z
        )

    uvv = u * v * v
    du = d_u * lap(u) - uvv + f_rate * (1.0 - u)
    dv = d_v * lap(v) + uvv - (f_rate + k_rate) * v
    return np.stack([du, dv], axis=-3)


def _rollout_gs_py(y0, d_u, d_v, f_rate, k_rate, inv_ds2, dt, substeps, n_frames):
    frames = np.empty((n_frames + 1,) + y0.shape)
    frames[0] = y0
    step = dt / substeps
    y = y0.copy()
    for f in range(1, n_frames + 1):
        for _ in range(substeps):
            k1 = _gs_f_py(y, d_u, d_v, f_rate, k_rate, inv_ds2)
            k2 = _gs_f_py(y + 0.5 * step * k1, d_u, d_v, f_rate, k_rate, inv_ds2)
            k3 = _gs_f_py(y + 0.5 * step * k2, d_u, d_v, f_rate, k_rate, inv_ds2)
            k4 = _gs_f_py(y + step * k3, d_u, d_v, f_rate, k_rate, inv_ds2)
            y = y + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        frames[f] = y
    return frames


# ------------------------------------------------------------ dispatch --

def rollout_lv(y0, params, dt, substeps, n_frames, variant="standard"):
    printed = variant == "printed"
    args = (
        np.ascontiguousarray(y0, dtype=np.float64),
        float(params["alpha"]),
        float(params["beta"]),
        float(params["gamma"]),
        float(params["delta"]),
        printed,
        float(dt),
        int(substeps),
        int(n_frames),
    )
    if numba_enabled():
        return _rollout_lv_nb(*args)
    return _rollout_lv_py(*args)


def rollout_go(y0, params, dt, substeps, n_frames):
    p = go_param_vector(params)
    y0 = np.ascontiguousarray(y0, dtype=np.float64)
    if numba_enabled():
        return _rollout_go_nb(y0, p, float(dt), int(substeps), int(n_frames))
    return _rollout_go_py(y0, p, float(dt), int(substeps), int(n_frames))


def rollout_gs(y0, params, inv_ds2, dt, substeps, n_frames):
    args = (
        np.ascontiguousarray(y0, dtype=np.float64),
        float(params["D_u"]),
        float(params["D_v"]),
        float(params["F"]),
        float(params["k"]),
        float(inv_ds2),
        float(dt),
        int(substeps),
        int(n_frames),
    )
    if numba_enabled():
        return _rollout_gs_nb(*args)
    return _rollout_gs_py(*args)
