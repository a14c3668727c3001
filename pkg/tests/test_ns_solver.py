import numpy as np
import pytest

from fnsda.dynamics.spectral_ns import (
    NsWorkspace,
    forcing_field,
    ns_step,
    rollout_ns,
    spectral_divergence,
)
from fnsda.errors import ConfigError

SIDE = 32


@pytest.fixture(scope="module")
def ws():
    return NsWorkspace(SIDE)


def _mode(k1, k2):
    coords = np.arange(SIDE) / SIDE
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    return np.cos(2 * np.pi * (k1 * xx + k2 * yy))


def test_single_mode_decay_one_substep(ws):
    nu, dt = 1e-3, 1e-2
    w = _mode(1, 1)
    w1 = ns_step(w, nu, dt, ws, with_forcing=False, with_advection=False)
    k2 = (2 * np.pi) ** 2 * (1 + 1)
    ratio = w1[0, 0] / w[0, 0]  # cos peak; avoids nodes of the mode
    assert abs(ratio - np.exp(-nu * k2 * dt)) < 1e-10


def test_single_mode_decay_one_recorded_frame(ws):
    nu = 1.2e-3
    w = _mode(2, 1)
    for _ in range(100):
        w = ns_step(w, nu, 1e-2, ws, with_forcing=False, with_advection=False)
    k2 = (2 * np.pi) ** 2 * (4 + 1)
    assert abs(w[4, 7] / _mode(2, 1)[4, 7] - np.exp(-nu * k2 * 1.0)) < 1e-6


def test_zero_vorticity_zero_forcing_fixed_point(ws):
    out = ns_step(np.zeros((SIDE, SIDE)), 1e-3, 1e-2, ws, with_forcing=False)
    np.testing.assert_array_equal(out, 0.0)


def test_velocity_divergence_free(ws):
    rng = np.random.default_rng(5)
    w = rng.standard_normal((SIDE, SIDE))
    assert spectral_divergence(w, ws) < 1e-12


def test_mean_vorticity_invariant_with_zero_mean_forcing(ws):
    rng = np.random.default_rng(6)
    w = rng.standard_normal((SIDE, SIDE))
    w -= w.mean()
    assert abs(forcing_field(*np.meshgrid(np.arange(SIDE) / SIDE, np.arange(SIDE) / SIDE)).mean()) < 1e-14
    out = ns_step(w, 1e-3, 1e-2, ws)
    assert abs(out.mean()) < 1e-13


def test_internal_step_stability_bound(ws):
    with pytest.raises(ConfigError):
        ns_step(np.zeros((SIDE, SIDE)), 1e-3, 0.2, ws)
    with pytest.raises(ConfigError):
        rollout_ns(np.zeros((1, SIDE, SIDE)), 1e-3, 1.0, 2, 1, ws)


def test_rollout_shapes_and_finiteness(ws):
    from fnsda.dynamics.sampling import sample_ns

    w0 = np.stack([sample_ns(np.random.default_rng(i), SIDE)[0] for i in range(2)])
    frames = rollout_ns(w0, 1e-3, 1.0, 100, 3, ws)
    assert frames.shape == (4, 2, SIDE, SIDE)
    assert np.all(np.isfinite(frames))
