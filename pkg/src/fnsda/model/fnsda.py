"""The surrogate architecture: lift, spectral layers, projection.

Layer l computes act(W_res z + K(z) + b) where K transforms z along the
spectral axis, truncates to the retained modes, splits every retained
mode between an environment branch and a shared branch through a
hard-sigmoid gate, applies the per-mode complex weights of each branch
(the environment branch's weights are generated linearly from the
context vector c_e), sums, zero-pads and transforms back.

ODE families carry no spatial grid, so the state is replicated over a
synthetic 1-d grid of length equal to the latent width, with the grid
coordinate appended as an input channel; the transform runs along that
axis. Spatial families transform over their 2-d grid and retain the
lowest-|k|^2 mode pairs of the half-spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..engine import (
    ComplexTensor,
    Tensor,
    complex_mode_mul,
    expand,
    gather_pairs,
    hard_sigmoid,
    irfft_1d,
    irfft_2d,
    matmul,
    narrow,
    reduce_mean,
    relu,
    reshape,
    rfft_1d,
    rfft_2d,
    scatter_pairs,
    swish,
    transpose,
    zero_pad,
)
from ..engine.tensor import affine, contract
from ..errors import ShapeError
from .config import ModelConfig, manual_partition_gate, mode_indices

_MODE_CACHE = {}
_COORD_CACHE = {}


def _cached_modes(config):
    key = (config.grid_side, config.modes)
    if key not in _MODE_CACHE:
        _MODE_CACHE[key] = mode_indices(config)
    return _MODE_CACHE[key]


def _cached_coords(config):
    if config.spectral_axis == "latent_1d":
        key = ("1d", config.seq_len)
        if key not in _COORD_CACHE:
            s = config.seq_len
            _COORD_CACHE[key] = (np.arange(s) / s).reshape(s, 1)
    else:
        key = ("2d", config.grid_side)
        if key not in _COORD_CACHE:
            side = config.grid_side
            ax = np.arange(side) / side
            yy, xx = np.meshgrid(ax, ax, indexing="ij")
            _COORD_CACHE[key] = np.stack([yy, xx], axis=-1)
    return _COORD_CACHE[key]


@dataclass
class EnvContext:
    """The only state mutated during adaptation: c_e plus one swish
    slope per layer."""

    c: Tensor
    beta: Tensor
    env_id: int = -1

    @classmethod
    def fresh(cls, config, env_id=-1, trainable=True):
        return cls(
            c=Tensor(np.zeros(config.context_dim), requires_grad=trainable),
            beta=Tensor(np.ones(config.layers), requires_grad=trainable),
            env_id=env_id,
        )

    def clone(self, trainable=True):
        return EnvContext(
            c=Tensor(self.c.data.copy(), requires_grad=trainable),
            beta=Tensor(self.beta.data.copy(), requires_grad=trainable),
            env_id=self.env_id,
        )


def init_params(config):
    """Fresh parameter dict; affine maps ~ U(+-1/sqrt(fan_in)), spectral
    weights ~ U(-1, 1)/(width*modes), gate logits 0 (even split)."""
    rng = np.random.default_rng(config.init_seed)
    m, k = config.width, config.modes
    dc = config.context_dim
    c_in = config.state_channels + config.coord_channels

    def affine(fan_in, shape):
        bound = 1.0 / np.sqrt(fan_in)
        return Tensor(rng.uniform(-bound, bound, shape), requires_grad=True)

    def spectral(shape):
        return Tensor(rng.uniform(-1.0, 1.0, shape) / (m * k), requires_grad=True)

    params = {
        "lift.w_state": affine(c_in, (config.state_channels, m)),
        "lift.w_coord": affine(c_in, (config.coord_channels, m)),
        "lift.bias": affine(c_in, (m,)),
    }
    for i in range(config.layers):
        params[f"layers.{i}.w_res"] = affine(m, (m, m))
        params[f"layers.{i}.bias"] = affine(m, (m,))
        params[f"layers.{i}.r_shared"] = spectral((k, m, m, 2))
        params[f"layers.{i}.w_env"] = spectral((k, m, m, 2, dc))
        if config.partition == "automatic":
            params[f"layers.{i}.gate_logits"] = Tensor(np.zeros(k), requires_grad=True)
    params["proj.w1"] = affine(m, (m, m))
    params["proj.b1"] = affine(m, (m,))
    params["proj.w2"] = affine(m, (m, config.state_channels))
    params["proj.b2"] = affine(m, (config.state_channels,))
    return params


def trainable_names(config):
    """Parameter names updated by training; ERM-style runs exclude the
    environment branch entirely."""
    names = ["lift.w_state", "lift.w_coord", "lift.bias", "proj.w1", "proj.b1", "proj.w2", "proj.b2"]
    for i in range(config.layers):
        names += [f"layers.{i}.w_res", f"layers.{i}.bias", f"layers.{i}.r_shared"]
        if config.contexts_enabled:
            names.append(f"layers.{i}.w_env")
        if config.partition == "automatic":
            names.append(f"layers.{i}.gate_logits")
    return names


def split_complex(t):
    """[.., 2] real tensor -> ComplexTensor over the leading axes."""
    lead = t.shape[:-1]
    re = reshape(narrow(t, t.ndim - 1, 0, 1), lead)
    im = reshape(narrow(t, t.ndim - 1, 1, 1), lead)
    return ComplexTensor(re, im)


def condition_weights(w_env, c):
    """R_e = W_env . c_e: contract the context axis, split re/im."""
    if w_env.shape[-1] != c.shape[0]:
        raise ShapeError(
            f"condition_weights: context dim {c.shape[0]} != W_env axis {w_env.shape[-1]}"
        )
    return split_complex(contract(w_env, c, ([w_env.ndim - 1], [0])))


def gate_values(params, layer, config):
    """Per-mode gate K in [0, 1]; learnable only for automatic partition."""
    if config.partition == "automatic":
        return hard_sigmoid(params[f"layers.{layer}.gate_logits"])
    return Tensor(manual_partition_gate(config))


def split_modes(zt, gate):
    """(z_e, z_s) = (K z, (1-K) z); exact complement by construction."""
    k = gate.shape[0]
    if zt.shape[-2] != k:
        raise ShapeError(f"split_modes: {zt.shape} does not carry {k} retained modes")
    shape = (1,) * (len(zt.shape) - 2) + (k, 1)
    ge = expand(reshape(gate, shape), zt.shape)
    gs = expand(reshape(Tensor(1.0) - gate, shape), zt.shape)
    return zt.scale_by(ge), zt.scale_by(gs)


def spectral_kernel(z, layer, params, c, config):
    """Gated, environment-conditioned spectral convolution."""
    k = config.modes
    if config.spectral_axis == "latent_1d":
        s = config.seq_len
        zh = rfft_1d(z, axis=1)
        zt = ComplexTensor(narrow(zh.re, 1, 0, k), narrow(zh.im, 1, 0, k))
    else:
        rows, cols = _cached_modes(config)
        zh = rfft_2d(z, axes=(1, 2))
        zt = ComplexTensor(
            gather_pairs(zh.re, (1, 2), rows, cols),
            gather_pairs(zh.im, (1, 2), rows, cols),
        )
    gate = gate_values(params, layer, config)
    z_env, z_sh = split_modes(zt, gate)
    r_shared = split_complex(params[f"layers.{layer}.r_shared"])
    out = complex_mode_mul(r_shared, z_sh)
    if config.partition != "all_shared":
        r_env = condition_weights(params[f"layers.{layer}.w_env"], c)
        out = out + complex_mode_mul(r_env, z_env)
    if config.spectral_axis == "latent_1d":
        half = s // 2 + 1
        padded = ComplexTensor(zero_pad(out.re, 1, half, 0), zero_pad(out.im, 1, half, 0))
        return irfft_1d(padded, s, axis=1)
    side = config.grid_side
    half = side // 2 + 1
    padded = ComplexTensor(
        scatter_pairs(out.re, (1, 2), (side, half), rows, cols),
        scatter_pairs(out.im, (1, 2), (side, half), rows, cols),
    )
    return irfft_2d(padded, side, axes=(1, 2))


def _activate(h, beta, config):
    if config.activation == "swish":
        return swish(h, beta)
    return relu(h)


def fourier_layer(z, layer, params, c, beta, config):
    kz = spectral_kernel(z, layer, params, c, config)
    h = affine(z, params[f"layers.{layer}.w_res"], params[f"layers.{layer}.bias"]) + kz
    return _activate(h, beta, config)


def lift(u, params, config):
    """Pointwise affine to width m, with grid coordinates as extra
    channels; ODE states are first replicated over the synthetic grid."""
    coords = Tensor(_cached_coords(config))
    coord_feat = affine(coords, params["lift.w_coord"], params["lift.bias"])
    z_state = matmul(u, params["lift.w_state"])
    b = u.shape[0]
    m = config.width
    if config.spectral_axis == "latent_1d":
        s = config.seq_len
        z = expand(reshape(z_state, (b, 1, m)), (b, s, m))
        return z + expand(reshape(coord_feat, (1, s, m)), (b, s, m))
    side = config.grid_side
    return z_state + expand(
        reshape(coord_feat, (1, side, side, m)), (b, side, side, m)
    )


def project(z, params, config):
    """Two-stage pointwise head; its activation is environment-free."""
    h = _activate(affine(z, params["proj.w1"], params["proj.b1"]), Tensor(1.0), config)
    return affine(h, params["proj.w2"], params["proj.b2"])


def model_forward(u, ctx, params, config):
    """Estimated time derivative of a batch of states.

    ``u``: [B, d] for ODE families, [B, C, H, W] for spatial ones
    (numpy or Tensor). Output matches the input shape.
    """
    if not isinstance(u, Tensor):
        u = Tensor(u)
    if config.spectral_axis == "latent_1d":
        if u.shape[-1] != config.state_channels:
            raise ShapeError(
                f"model_forward: state dim {u.shape} != {config.state_channels} channels"
            )
        z = lift(u, params, config)
    else:
        if u.shape[-3] != config.state_channels or u.shape[-1] != config.grid_side:
            raise ShapeError(
                f"model_forward: field {u.shape} incompatible with "
                f"[{config.state_channels}, {config.grid_side}, {config.grid_side}]"
            )
        z = lift(transpose(u, (0, 2, 3, 1)), params, config)
    for layer in range(config.layers):
        beta = reshape(narrow(ctx.beta, 0, layer, 1), ())
        z = fourier_layer(z, layer, params, ctx.c, beta, config)
    out = project(z, params, config)
    if config.spectral_axis == "latent_1d":
        return reduce_mean(out, axis=1)
    return transpose(out, (0, 3, 1, 2))


def count_params(params):
    return int(sum(p.size for p in params.values()))


def count_adapted_params(config):
    """Scalars touched by adaptation: the context plus one slope per layer."""
    return config.context_dim + config.layers
