"""Initial-condition samplers, one per family, deterministic per rng."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .systems import GO_IC_RANGES

GS_BACKGROUND = (1.0, 0.0)
GS_SQUARE_VALUE = (0.5, 0.25)
GS_N_SQUARES = 3
GS_SQUARE_SIDE = 2

# Spectral envelope of the NS initial vorticity: power ~ (4 pi^2 |k|^2 + 49)^-2.5
# with amplitude chosen to give O(0.3) fields; all configuration-owned.
NS_IC_TAU = 7.0
NS_IC_ALPHA = 2.5


def sample_lv(rng):
    return rng.uniform(1.0, 3.0, size=2)


def sample_go(rng, ranges=None):
    r = GO_IC_RANGES if ranges is None else np.asarray(ranges)
    return rng.uniform(r[:, 0], r[:, 1])


def sample_gs(rng, side):
    state = np.empty((2, side, side))
    state[0] = GS_BACKGROUND[0]
    state[1] = GS_BACKGROUND[1]
    for _ in range(GS_N_SQUARES):
        i = int(rng.integers(0, side))
        j = int(rng.integers(0, side))
        rows = [(i + di) % side for di in range(GS_SQUARE_SIDE)]
        cols = [(j + dj) % side for dj in range(GS_SQUARE_SIDE)]
        for r in rows:
            for c in cols:
                state[0, r, c] = GS_SQUARE_VALUE[0]
                state[1, r, c] = GS_SQUARE_VALUE[1]
    return state


def sample_ns(rng, side):
    """Periodic Gaussian random field, zero-mean vorticity.

    Real white noise is filtered in spectral space; a real input makes
    the spectrum Hermitian, so the inverse transform is real up to
    roundoff.
    """
    k = 2.0 * np.pi * np.fft.fftfreq(side, d=1.0 / side)
    k2 = k.reshape(-1, 1) ** 2 + k.reshape(1, -1) ** 2  # already carries 4 pi^2
    envelope = (
        np.sqrt(2.0)
        * NS_IC_TAU ** (0.5 * (2.0 * NS_IC_ALPHA - 2.0))
        * side
        * (k2 + NS_IC_TAU**2) ** (-NS_IC_ALPHA / 2.0)
    )
    xi = rng.standard_normal((side, side))
    w_hat = np.fft.fft2(xi) * envelope
    w_hat[0, 0] = 0.0
    w = np.fft.ifft2(w_hat).real
    return w[np.newaxis, :, :]


def sample_initial_condition(family, rng, spec=None):
    if family == "lv":
        return sample_lv(rng)
    if family == "go":
        return sample_go(rng)
    if family == "gs":
        return sample_gs(rng, spec.grid_side)
    if family == "ns":
        return sample_ns(rng, spec.grid_side)
    raise ConfigError(f"unknown family {family!r}")
