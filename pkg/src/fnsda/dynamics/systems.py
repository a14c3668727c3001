"""The four ground-truth system families and their environment grids.

Right-hand sides here are the plain numpy reference implementations,
vectorized over arbitrary leading batch axes. The numba-accelerated
rollout kernels in ``kernels.py`` reimplement the same arithmetic for
the integration hot loops.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DomainError

FAMILIES = ("lv", "go", "gs", "ns")

GRID_SIDE = 32

STATE_SHAPES = {
    "lv": (2,),
    "go": (7,),
    "gs": (2, GRID_SIDE, GRID_SIDE),
    "ns": (1, GRID_SIDE, GRID_SIDE),
}

# Per-species uniform initial-condition ranges for the glycolytic
# oscillator. These are configuration defaults owned by this package,
# chosen to put every species inside its oscillatory regime.
GO_IC_RANGES = np.array(
    [
        [0.15, 1.60],
        [0.19, 2.16],
        [0.04, 0.20],
        [0.10, 0.35],
        [0.08, 0.30],
        [0.14, 2.67],
        [0.05, 0.10],
    ]
)

GO_FIXED_PARAMS = {
    "J0": 2.5,
    "k1": 100.0,
    "k2": 6.0,
    "k3": 16.0,
    "k4": 100.0,
    "k5": 1.28,
    "k6": 12.0,
    "K1": 0.52,
    "q": 4.0,
    "N": 1.0,
    "A": 4.0,
    "kappa": 13.0,
    "psi": 0.1,
    "k": 1.8,
}


@dataclass
class SystemSpec:
    """One environment: a family plus its defining parameter values."""

    family: str
    params: dict
    dt: float
    horizon: float
    adapt_horizon: float
    grid_side: int | None = None
    grid_spacing: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not self.adapt_horizon < self.horizon:
            raise ConfigError(
                f"adapt horizon {self.adapt_horizon} must be < horizon {self.horizon}"
            )
        n = self.horizon / self.dt
        if abs(n - round(n)) > 1e-9:
            raise ConfigError(f"horizon {self.horizon} not a multiple of dt {self.dt}")
        if self.family in ("gs", "ns"):
            if self.grid_side != GRID_SIDE or self.grid_spacing is None:
                raise ConfigError(f"{self.family} requires a {GRID_SIDE}-cell grid")
        elif self.grid_side is not None:
            raise ConfigError(f"{self.family} takes no spatial grid")

    @property
    def n_steps(self):
        return int(round(self.horizon / self.dt))

    @property
    def state_shape(self):
        return STATE_SHAPES[self.family]

    def param_tuple(self):
        return tuple(sorted(self.params.items()))


@dataclass
class EnvironmentSet:
    family: str
    train_envs: list = field(default_factory=list)
    eval_envs: list = field(default_factory=list)
    n_tr: int = 0
    n_ev: int = 0

    def __post_init__(self):
        train_keys = {e.param_tuple() for e in self.train_envs}
        eval_keys = {e.param_tuple() for e in self.eval_envs}
        overlap = train_keys & eval_keys
        if overlap:
            raise ConfigError(f"train/eval environments overlap: {sorted(overlap)}")

    @property
    def all_envs(self):
        return list(self.train_envs) + list(self.eval_envs)


def _check_finite(state, name):
    if not np.all(np.isfinite(state)):
        raise DomainError(f"{name}: non-finite state input")


def lv_rhs(state, alpha, beta, gamma, delta, variant="standard"):
    """Lotka-Volterra derivatives for state (..., 2) = (prey, predator).

    ``variant="standard"`` uses dy/dt = delta*x*y - gamma*y. The
    ``"printed"`` variant dy/dt = delta*x - gamma*x*y is kept only for
    auditing against sources that state the system that way.
    """
    state = np.asarray(state, dtype=np.float64)
    _check_finite(state, "lv_rhs")
    x = state[..., 0]
    y = state[..., 1]
    dx = alpha * x - beta * x * y
    if variant == "standard":
        dy = delta * x * y - gamma * y
    elif variant == "printed":
        dy = delta * x - gamma * x * y
    else:
        raise ConfigError(f"unknown lv_rhs_variant {variant!r}")
    return np.stack([dx, dy], axis=-1)


def go_rhs(state, params):
    """Glycolytic-oscillator derivatives for state (..., 7).

    The source equations use both K5 and k5 for the same coefficient;
    this implementation has the single parameter ``k5``.
    """
    state = np.asarray(state, dtype=np.float64)
    _check_finite(state, "go_rhs")
    s1, s2, s3, s4, s5, s6, s7 = (state[..., i] for i in range(7))
    p = params
    v1 = p["k1"] * s1 * s6 / (1.0 + (s6 / p["K1"]) ** p["q"])
    t26 = p["k2"] * s2 * (p["N"] - s5)
    t36 = p["k3"] * s3 * (p["A"] - s6)
    t45 = p["k4"] * s4 * s5
    t25 = p["k6"] * s2 * s5
    d1 = p["J0"] - v1
    d2 = 2.0 * v1 - t26 - t25
    d3 = t26 - t36
    d4 = t36 - t45 - p["kappa"] * (s4 - s7)
    d5 = t26 - t45 - t25
    d6 = -2.0 * v1 + 2.0 * t36 - p["k5"] * s6
    d7 = p["psi"] * p["kappa"] * (s4 - s7) - p["k"] * s7
    return np.stack([d1, d2, d3, d4, d5, d6, d7], axis=-1)


def periodic_laplacian(field, inv_ds2):
    """5-point periodic Laplacian over the two trailing axes."""
    return inv_ds2 * (
        np.roll(field, 1, axis=-2)
        + np.roll(field, -1, axis=-2)
        + np.roll(field, 1, axis=-1)
        + np.roll(field, -1, axis=-1)
        - 4.0 * field
    )


def gs_rhs(state, d_u, d_v, f_rate, k_rate, inv_ds2):
    """Gray-Scott derivatives for state (..., 2, H, W) with periodic BCs.

    dv/dt carries +u*v^2 - (F+k)*v, the form in which v is produced by
    the reaction; see the decisions notes for the sign discussion.
    """
    state = np.asarray(state, dtype=np.float64)
    _check_finite(state, "gs_rhs")
    if state.shape[-3] != 2:
        raise DomainError(f"gs_rhs: expected channel axis of 2, got {state.shape}")
    u = state[..., 0, :, :]
    v = state[..., 1, :, :]
    uvv = u * v * v
    du = d_u * periodic_laplacian(u, inv_ds2) - uvv + f_rate * (1.0 - u)
    dv = d_v * periodic_laplacian(v, inv_ds2) + uvv - (f_rate + k_rate) * v
    return np.stack([du, dv], axis=-3)


def _lv_spec(beta, delta, dt=0.5, horizon=20.0, adapt=5.0, alpha=0.5, gamma=0.5):
    return SystemSpec(
        family="lv",
        params={"alpha": alpha, "beta": beta, "gamma": gamma, "delta": delta},
        dt=dt,
        horizon=horizon,
        adapt_horizon=adapt,
    )


def _go_spec(k1, cap_k1):
    params = dict(GO_FIXED_PARAMS)
    params["k1"] = k1
    params["K1"] = cap_k1
    return SystemSpec(
        family="go", params=params, dt=0.05, horizon=2.0, adapt_horizon=0.5
    )


def _gs_spec(f_rate, k_rate):
    return SystemSpec(
        family="gs",
        params={"F": f_rate, "k": k_rate, "D_u": 0.2097, "D_v": 0.105},
        dt=40.0,
        horizon=400.0,
        adapt_horizon=80.0,
        grid_side=GRID_SIDE,
        grid_spacing=2.0,
    )


def _ns_spec(visc):
    return SystemSpec(
        family="ns",
        params={"visc": visc},
        dt=1.0,
        horizon=10.0,
        adapt_horizon=2.0,
        grid_side=GRID_SIDE,
        grid_spacing=1.0 / GRID_SIDE,
    )


# Evaluation k values for Gray-Scott: sources list {0.59, 0.61}, an
# order of magnitude away from the train grid {0.058, 0.062}; the
# defaults here treat that as a typo for {0.059, 0.061}.
GS_EVAL_K = (0.059, 0.061)


def default_environment_set(family, n_tr=None, n_ev=None):
    """Environment grids and trajectory counts for each family."""
    if family == "lv":
        train = [_lv_spec(b, d) for b in (0.5, 0.75, 1.0) for d in (0.5, 0.75, 1.0)]
        evals = [_lv_spec(b, d) for b in (0.625, 1.125) for d in (0.625, 1.125)]
        counts = (100, 50)
    elif family == "go":
        train = [_go_spec(k1, kk) for k1 in (100.0, 90.0, 80.0) for kk in (1.0, 0.75, 0.5)]
        evals = [_go_spec(k1, kk) for k1 in (85.0, 95.0) for kk in (0.625, 0.875)]
        counts = (100, 50)
    elif family == "gs":
        train = [_gs_spec(f, k) for f in (0.30, 0.39) for k in (0.058, 0.062)]
        evals = [_gs_spec(f, k) for f in (0.33, 0.36) for k in GS_EVAL_K]
        counts = (50, 50)
    elif family == "ns":
        train = [_ns_spec(v) for v in (8e-4, 9e-4, 1.0e-3, 1.1e-3, 1.2e-3)]
        evals = [_ns_spec(v) for v in (8.5e-4, 9.5e-4, 1.05e-3, 1.15e-3)]
        counts = (50, 50)
    else:
        raise ConfigError(f"unknown family {family!r}")
    return EnvironmentSet(
        family=family,
        train_envs=train,
        eval_envs=evals,
        n_tr=n_tr if n_tr is not None else counts[0],
        n_ev=n_ev if n_ev is not None else counts[1],
    )
