"""Pseudo-spectral vorticity solver on the periodic unit square.

Scheme: streamfunction Poisson solve in spectral space, 2/3-rule
dealiased advection, Crank-Nicolson viscous term with a Heun (RK2)
treatment of advection + forcing. The recording grid is 1 s; the
internal substep defaults to 1e-2 s and is a configuration value, as is
the whole scheme (sources for this family pin only the recording grid).
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError

DEFAULT_DT_INTERNAL = 1e-2
MAX_DT_INTERNAL = 0.05


class NsWorkspace:
    """Precomputed wavenumber grids, dealias mask and forcing spectrum."""

    def __init__(self, side):
        self.side = side
        k = 2.0 * np.pi * np.fft.fftfreq(side, d=1.0 / side)
        self.kx = k.reshape(1, side)  # second axis varies along x
        self.ky = k.reshape(side, 1)
        self.k2 = self.kx**2 + self.ky**2
        k2_safe = self.k2.copy()
        k2_safe[0, 0] = 1.0
        self.inv_k2 = 1.0 / k2_safe
        self.inv_k2[0, 0] = 0.0
        cutoff = 2.0 * np.pi * (side // 3)
        self.dealias = (np.abs(self.kx) <= cutoff) & (np.abs(self.ky) <= cutoff)
        coords = np.arange(side) / side
        yy, xx = np.meshgrid(coords, coords, indexing="ij")
        self.forcing = forcing_field(xx, yy)

    def velocity_hat(self, w_hat):
        """Velocity spectra from the streamfunction; divergence-free."""
        psi_hat = w_hat * self.inv_k2
        u_hat = 1j * self.ky * psi_hat
        v_hat = -1j * self.kx * psi_hat
        return u_hat, v_hat


def forcing_field(xx, yy):
    s = 2.0 * np.pi * (xx + yy)
    return 0.1 * (np.sin(s) + np.cos(s))


def velocity_from_vorticity(w, ws=None):
    """Physical-space velocity (u, v) recovered from vorticity w."""
    ws = ws or NsWorkspace(w.shape[-1])
    w_hat = np.fft.fft2(w)
    u_hat, v_hat = ws.velocity_hat(w_hat)
    return np.fft.ifft2(u_hat).real, np.fft.ifft2(v_hat).real


def spectral_divergence(w, ws=None):
    """Max-abs spectral divergence of the recovered velocity."""
    ws = ws or NsWorkspace(w.shape[-1])
    w_hat = np.fft.fft2(w)
    u_hat, v_hat = ws.velocity_hat(w_hat)
    div_hat = 1j * ws.kx * u_hat + 1j * ws.ky * v_hat
    return float(np.max(np.abs(div_hat)))


def _nonlinear_hat(w_hat, ws, forcing_hat):
    u_hat, v_hat = ws.velocity_hat(w_hat)
    u = np.fft.ifft2(u_hat).real
    v = np.fft.ifft2(v_hat).real
    wx = np.fft.ifft2(1j * ws.kx * w_hat).real
    wy = np.fft.ifft2(1j * ws.ky * w_hat).real
    adv_hat = np.fft.fft2(u * wx + v * wy) * ws.dealias
    return -adv_hat + forcing_hat


def ns_step(w, visc, dt_internal, ws=None, with_forcing=True, with_advection=True):
    """Advance vorticity one internal substep; returns a real field.

    Batched over leading axes. The flags exist so tests can isolate the
    pure-diffusion behavior.
    """
    if dt_internal > MAX_DT_INTERNAL:
        raise ConfigError(
            f"ns dt_internal {dt_internal} above stability bound {MAX_DT_INTERNAL}"
        )
    ws = ws or NsWorkspace(w.shape[-1])
    forcing_hat = np.fft.fft2(ws.forcing) if with_forcing else np.zeros_like(ws.k2, dtype=complex)
    w_hat = np.fft.fft2(w)
    out = _step_hat(w_hat, visc, dt_internal, ws, forcing_hat, with_advection)
    return np.fft.ifft2(out).real


def _step_hat(w_hat, visc, dt, ws, forcing_hat, with_advection=True):
    visc_half = 0.5 * dt * visc * ws.k2
    denom = 1.0 + visc_half
    numer = 1.0 - visc_half
    if with_advection:
        n0 = _nonlinear_hat(w_hat, ws, forcing_hat)
    else:
        n0 = forcing_hat
    w_pred = (numer * w_hat + dt * n0) / denom
    if with_advection:
        n1 = _nonlinear_hat(w_pred, ws, forcing_hat)
    else:
        n1 = forcing_hat
    return (numer * w_hat + 0.5 * dt * (n0 + n1)) / denom


def rollout_ns(w0, visc, dt_record, substeps, n_frames, ws=None):
    """Record ``n_frames`` frames every ``dt_record`` seconds; batched."""
    ws = ws or NsWorkspace(w0.shape[-1])
    dt = dt_record / substeps
    if dt > MAX_DT_INTERNAL:
        raise ConfigError(f"ns internal step {dt} above stability bound {MAX_DT_INTERNAL}")
    forcing_hat = np.fft.fft2(ws.forcing)
    frames = np.empty((n_frames + 1,) + w0.shape)
    frames[0] = w0
    w_hat = np.fft.fft2(w0)
    for f in range(1, n_frames + 1):
        for _ in range(substeps):
            w_hat = _step_hat(w_hat, visc, dt, ws, forcing_hat)
        frames[f] = np.fft.ifft2(w_hat).real
    return frames
