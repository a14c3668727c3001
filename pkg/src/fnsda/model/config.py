"""Model configuration, mode enumeration, and partition gates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..dynamics.systems import GRID_SIDE, STATE_SHAPES

ACTIVATIONS = ("swish", "relu")
PARTITIONS = ("automatic", "low_only", "high_only", "cross", "all_shared")


def _is_pow2(n):
    return n >= 2 and (n & (n - 1)) == 0


@dataclass
class ModelConfig:
    family: str
    layers: int
    width: int
    modes: int
    context_dim: int
    activation: str = "swish"
    partition: str = "automatic"
    cross_p: int = 1
    cross_q: int = 1
    spectral_axis: str = "latent_1d"
    state_channels: int = 2
    grid_side: int | None = None
    # Share of retained modes counted as "low" by the manual low/high
    # partitions; 1.0 degenerates to everything-low.
    low_fraction: float = 0.5
    contexts_enabled: bool = True
    init_seed: int = 0

    def __post_init__(self):
        if self.layers < 1:
            raise ConfigError("layers must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.partition not in PARTITIONS:
            raise ConfigError(f"unknown partition {self.partition!r}")
        if self.spectral_axis == "latent_1d":
            if not _is_pow2(self.width):
                raise ConfigError(f"latent width {self.width} must be a power of two")
            if self.modes > self.width // 2 + 1:
                raise ConfigError(
                    f"modes {self.modes} exceeds width//2+1 = {self.width // 2 + 1}"
                )
            if self.width < 2 * self.modes:
                raise ConfigError(f"width {self.width} must be >= 2*modes {2 * self.modes}")
        elif self.spectral_axis == "spatial_2d":
            if self.grid_side is None or not _is_pow2(self.grid_side):
                raise ConfigError("spatial_2d requires a power-of-two grid_side")
            if self.modes > self.grid_side // 2:
                raise ConfigError(
                    f"modes {self.modes} exceeds grid_side/2 = {self.grid_side // 2}"
                )
        else:
            raise ConfigError(f"unknown spectral_axis {self.spectral_axis!r}")
        if self.partition == "cross" and (self.cross_p < 0 or self.cross_q < 1):
            raise ConfigError(f"bad cross split ({self.cross_p},{self.cross_q})")

    @property
    def coord_channels(self):
        return 1 if self.spectral_axis == "latent_1d" else 2

    @property
    def seq_len(self):
        """Length of the transform axis (synthetic latent grid for ODEs)."""
        return self.width if self.spectral_axis == "latent_1d" else self.grid_side


# Per-family defaults: layer count and retained modes follow the method's
# reference setups; latent width and the projection head are this
# package's own defaults (config-exposed).
_FAMILY_DEFAULTS = {
    "lv": dict(layers=2, modes=10, width=32, context_dim=10),
    "go": dict(layers=2, modes=10, width=32, context_dim=20),
    "gs": dict(layers=4, modes=12, width=64, context_dim=20),
    "ns": dict(layers=4, modes=12, width=64, context_dim=10),
}


def default_model_config(family, **overrides):
    if family not in _FAMILY_DEFAULTS:
        raise ConfigError(f"unknown family {family!r}")
    kw = dict(_FAMILY_DEFAULTS[family])
    shape = STATE_SHAPES[family]
    if len(shape) == 1:
        kw.update(spectral_axis="latent_1d", state_channels=shape[0], grid_side=None)
    else:
        kw.update(
            spectral_axis="spatial_2d", state_channels=shape[0], grid_side=GRID_SIDE
        )
    kw.update(overrides)
    return ModelConfig(family=family, **kw)


def mode_indices(config):
    """Retained 2-d mode pairs, ascending by |k|^2 with a fixed tie-break.

    Returns (rows, cols) into the rfft2 half-spectrum [H, W/2+1]. Row r
    carries wavenumber r for r <= H/2 and r - H above; both signs of ky
    are eligible (they are independent once kx > 0). Only spatial_2d
    configs use this; the 1-d axis truncates to the lowest ``modes``
    non-negative frequencies directly.
    """
    if config.spectral_axis != "spatial_2d":
        raise ConfigError("mode_indices applies to spatial_2d configs")
    side = config.grid_side
    half = side // 2 + 1
    entries = []
    for r in range(side):
        ky = r if r <= side // 2 else r - side
        for c in range(half):
            k2 = ky * ky + c * c
            entries.append((k2, abs(ky), 0 if ky >= 0 else 1, c, r))
    entries.sort()
    chosen = entries[: config.modes]
    rows = np.array([e[4] for e in chosen], dtype=np.intp)
    cols = np.array([e[3] for e in chosen], dtype=np.intp)
    return rows, cols


def manual_partition_gate(config):
    """Fixed 0/1 gate (1 = environment-specific) for manual partitions.

    Modes are indexed in ascending frequency order. ``cross`` splits
    consecutive groups of p+q modes into p shared followed by q
    environment-specific; a remainder group follows the same rule
    truncated.
    """
    k = config.modes
    gate = np.zeros(k)
    if config.partition == "all_shared":
        return gate
    if config.partition == "low_only":
        n_low = int(round(k * config.low_fraction))
        gate[:n_low] = 1.0
        return gate
    if config.partition == "high_only":
        n_high = int(round(k * config.low_fraction))
        gate[k - n_high :] = 1.0
        return gate
    if config.partition == "cross":
        p, q = config.cross_p, config.cross_q
        for start in range(0, k, p + q):
            lo = min(start + p, k)
            hi = min(start + p + q, k)
            gate[lo:hi] = 1.0
        return gate
    raise ConfigError(f"partition {config.partition!r} has no fixed gate")
