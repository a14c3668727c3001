"""Differentiable FFT primitives and complex-pair arithmetic.

Complex values are carried as (re, im) pairs of real tensors, so the
chain rule stays plain real calculus (the final loss is always real).
Convention: unnormalized forward transform, 1/N on the inverse. Real
input transforms keep only the n/2+1 non-redundant modes. Transform
axes must be a power of two; this is a contract of the package (the
latent width and the 32x32 grids all qualify), not a numpy limitation.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, ShapeError
from .tensor import Tensor, _make, matmul, mul, reshape, transpose


def _check_pow2(n, what):
    if n < 2 or (n & (n - 1)) != 0:
        raise ConfigError(f"{what}: transform length {n} is not a power of two")


class ComplexTensor:
    """A pair of equal-shape real tensors (re, im) on the same tape."""

    __slots__ = ("re", "im")

    def __init__(self, re, im):
        if re.shape != im.shape:
            raise ShapeError(f"complex parts differ: {re.shape} vs {im.shape}")
        self.re = re
        self.im = im

    @property
    def shape(self):
        return self.re.shape

    def value(self):
        """Current complex numpy value (detached from the tape)."""
        return self.re.data + 1j * self.im.data

    def __add__(self, other):
        return ComplexTensor(self.re + other.re, self.im + other.im)

    def scale_by(self, real_t):
        """Multiply both parts by a real tensor of the same shape (or scalar)."""
        return ComplexTensor(mul(self.re, real_t), mul(self.im, real_t))


def to_complex(t):
    return ComplexTensor(t, Tensor(np.zeros(t.shape)))


def _norm_axis(axis, ndim):
    return axis % ndim


def fft_1d(x, axis):
    """Unnormalized DFT along ``axis``; real or complex input."""
    if isinstance(x, Tensor):
        x = to_complex(x)
    axis = _norm_axis(axis, x.re.ndim)
    n = x.shape[axis]
    _check_pow2(n, "fft_1d")
    re, im = x.re, x.im
    X = np.fft.fft(re.data + 1j * im.data, axis=axis)

    def backward_re(g):
        h = n * np.fft.ifft(g, axis=axis)
        if re.requires_grad:
            re.accumulate_grad(h.real)
        if im.requires_grad:
            im.accumulate_grad(h.imag)

    def backward_im(g):
        h = n * np.fft.ifft(g, axis=axis)
        if re.requires_grad:
            re.accumulate_grad(-h.imag)
        if im.requires_grad:
            im.accumulate_grad(h.real)

    out_re = _make(X.real, (re, im), backward_re)
    out_im = _make(X.imag, (re, im), backward_im)
    return ComplexTensor(out_re, out_im)


def ifft_1d(x, axis):
    """Inverse DFT along ``axis`` (carries the 1/N factor)."""
    axis = _norm_axis(axis, x.re.ndim)
    n = x.shape[axis]
    _check_pow2(n, "ifft_1d")
    re, im = x.re, x.im
    X = np.fft.ifft(re.data + 1j * im.data, axis=axis)

    def backward_re(g):
        h = np.fft.fft(g, axis=axis) / n
        if re.requires_grad:
            re.accumulate_grad(h.real)
        if im.requires_grad:
            im.accumulate_grad(h.imag)

    def backward_im(g):
        h = np.fft.fft(g, axis=axis) / n
        if re.requires_grad:
            re.accumulate_grad(-h.imag)
        if im.requires_grad:
            im.accumulate_grad(h.real)

    out_re = _make(X.real, (re, im), backward_re)
    out_im = _make(X.imag, (re, im), backward_im)
    return ComplexTensor(out_re, out_im)


def rfft_1d(x, axis):
    """DFT of a real tensor, returning the n/2+1 non-redundant modes."""
    axis = _norm_axis(axis, x.ndim)
    n = x.shape[axis]
    _check_pow2(n, "rfft_1d")
    X = np.fft.rfft(x.data, axis=axis)
    half = n // 2 + 1

    def _pad(g):
        pad_shape = list(g.shape)
        pad_shape[axis] = n
        buf = np.zeros(pad_shape, dtype=np.complex128)
        sl = tuple(
            slice(0, half) if ax == axis else slice(None) for ax in range(g.ndim)
        )
        buf[sl] = g
        return buf

    def backward_re(g):
        if x.requires_grad:
            h = n * np.fft.ifft(_pad(g), axis=axis)
            x.accumulate_grad(h.real)

    def backward_im(g):
        if x.requires_grad:
            h = n * np.fft.ifft(_pad(g), axis=axis)
            x.accumulate_grad(-h.imag)

    out_re = _make(X.real, (x,), backward_re)
    out_im = _make(X.imag, (x,), backward_im)
    return ComplexTensor(out_re, out_im)


def irfft_1d(x, n, axis):
    """Real inverse of ``rfft_1d``; ``n`` is the output length."""
    axis = _norm_axis(axis, x.re.ndim)
    _check_pow2(n, "irfft_1d")
    half = n // 2 + 1
    if x.shape[axis] != half:
        raise ShapeError(
            f"irfft_1d: expected {half} modes along axis {axis}, got {x.shape[axis]}"
        )
    re, im = x.re, x.im
    y = np.fft.irfft(re.data + 1j * im.data, n=n, axis=axis)
    # Non-redundant interior bins appear twice in the Hermitian extension.
    weights_shape = [1] * re.ndim
    weights_shape[axis] = half
    weights = np.full(half, 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0
    weights = weights.reshape(weights_shape) / n

    def backward(g):
        G = np.fft.fft(g, axis=axis)
        sl = tuple(
            slice(0, half) if ax == axis else slice(None) for ax in range(g.ndim)
        )
        G = G[sl] * weights
        if re.requires_grad:
            re.accumulate_grad(G.real)
        if im.requires_grad:
            im.accumulate_grad(G.imag)

    return _make(y, (re, im), backward)


def fft_2d(x, axes):
    return fft_1d(fft_1d(x, axes[1]), axes[0])


def ifft_2d(x, axes):
    return ifft_1d(ifft_1d(x, axes[1]), axes[0])


def rfft_2d(x, axes):
    """2-d real transform: full DFT on axes[0], half-spectrum on axes[1]."""
    return fft_1d(rfft_1d(x, axes[1]), axes[0])


def irfft_2d(x, n1, axes):
    return irfft_1d(ifft_1d(x, axes[0]), n1, axes[1])


def complex_mode_mul(weights, modes):
    """Per-mode complex matrix product: out[.., k, n] = sum_m modes[.., k, m] w[k, m, n].

    ``weights`` has shape [K, M, N]; ``modes`` has shape [.., K, M] with
    arbitrary leading batch axes.
    """
    if len(weights.shape) != 3:
        raise ShapeError(f"complex_mode_mul: weights must be [K, M, N], got {weights.shape}")
    k, m, _ = weights.shape
    if len(modes.shape) < 2 or modes.shape[-2] != k or modes.shape[-1] != m:
        raise ShapeError(
            f"complex_mode_mul: modes {modes.shape} incompatible with weights {weights.shape}"
        )
    lead = modes.shape[:-2]
    b = int(np.prod(lead)) if lead else 1

    def _mm(zr, wr):
        z3 = transpose(reshape(zr, (b, k, m)), (1, 0, 2))
        out = matmul(z3, wr)
        return reshape(transpose(out, (1, 0, 2)), lead + (k, weights.shape[2]))

    out_re = _mm(modes.re, weights.re) - _mm(modes.im, weights.im)
    out_im = _mm(modes.re, weights.im) + _mm(modes.im, weights.re)
    return ComplexTensor(out_re, out_im)
