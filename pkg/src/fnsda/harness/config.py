"""Experiment configuration: family defaults, file format, digests.

The config file is line-oriented ``key = value`` text under one section
per module::

    [dynamics]
    n_train_traj = 100
    ...

Unknown sections or keys are errors. Values are parsed by the type of
the default; ``none`` clears an optional. The resolved config is written
into every run directory for provenance.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace

from ..errors import ConfigError
from ..dynamics.systems import FAMILIES, STATE_SHAPES, GRID_SIDE
from ..model.config import ModelConfig, _FAMILY_DEFAULTS
from ..optim import OPT_DEFAULTS, TRAIN_WARMUP_STEPS
from ..pipelines.adapt import AdaptSettings
from ..pipelines.train import TrainSettings


@dataclass
class ExperimentConfig:
    # [dynamics]
    family: str = "lv"
    n_train_traj: int = 100
    n_eval_traj: int = 50
    gen_substeps: int | None = None
    lv_rhs_variant: str = "standard"
    # [model]
    layers: int = 2
    width: int = 32
    modes: int = 10
    context_dim: int = 10
    activation: str = "swish"
    partition: str = "automatic"
    cross_p: int = 1
    cross_q: int = 1
    low_fraction: float = 0.5
    contexts_enabled: bool = True
    # [optimization]
    lr: float = 5e-4
    lr_context: float | None = None
    weight_decay: float = 1e-4
    warmup_steps: int = TRAIN_WARMUP_STEPS
    # [pipelines]
    train_steps: int = 50000
    adapt_steps: int = 20000
    batch_traj: int = 16
    starts_per_traj: int | None = None
    horizon_steps: int = 1
    lam: float = 1e-4
    reg: str = "l2"
    # [harness]
    task: str = "inter"
    seed: int = 0
    mape_eps: float = 1e-8


SECTIONS = {
    "dynamics": ("family", "n_train_traj", "n_eval_traj", "gen_substeps", "lv_rhs_variant"),
    "model": (
        "layers",
        "width",
        "modes",
        "context_dim",
        "activation",
        "partition",
        "cross_p",
        "cross_q",
        "low_fraction",
        "contexts_enabled",
    ),
    "optimization": ("lr", "lr_context", "weight_decay", "warmup_steps"),
    "pipelines": (
        "train_steps",
        "adapt_steps",
        "batch_traj",
        "starts_per_traj",
        "horizon_steps",
        "lam",
        "reg",
    ),
    "harness": ("task", "seed", "mape_eps"),
}

_FIELD_SECTION = {name: sec for sec, names in SECTIONS.items() for name in names}

# Optional integer/float fields where "none" means "use the default".
_OPTIONAL = {"gen_substeps": int, "lr_context": float, "starts_per_traj": int}


def experiment_defaults(family, **overrides):
    """Family-specific defaults for every knob."""
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}")
    model = _FAMILY_DEFAULTS[family]
    opt = OPT_DEFAULTS[family]
    counts = dict(lv=(100, 50), go=(100, 50), gs=(50, 50), ns=(50, 50))[family]
    batch = 16 if family in ("lv", "go") else 4
    cfg = ExperimentConfig(
        family=family,
        n_train_traj=counts[0],
        n_eval_traj=counts[1],
        layers=model["layers"],
        width=model["width"],
        modes=model["modes"],
        context_dim=model["context_dim"],
        lr=opt["lr"],
        weight_decay=opt["weight_decay"],
        batch_traj=batch,
    )
    return replace(cfg, **overrides)


def _coerce(name, raw, current_default):
    raw = raw.strip()
    if name in _OPTIONAL:
        if raw.lower() == "none":
            return None
        return _OPTIONAL[name](raw)
    kind = type(current_default)
    if kind is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"bad boolean for {name}: {raw!r}")
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw


def parse_experiment_config(text, base=None):
    cfg = base if base is not None else ExperimentConfig()
    values = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if section is None:
            raise ConfigError(f"line {lineno}: key {key!r} outside any section")
        if key not in SECTIONS[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]")
        values[key] = _coerce(key, raw, getattr(cfg, key))
    if "family" in values and base is None:
        cfg = experiment_defaults(values["family"])
    for key, val in values.items():
        cfg = replace(cfg, **{key: val})
    return cfg


def load_experiment_config(path, base=None):
    with open(path) as fh:
        return parse_experiment_config(fh.read(), base)


def render_experiment_config(cfg):
    lines = []
    for section, names in SECTIONS.items():
        lines.append(f"[{section}]")
        for name in names:
            val = getattr(cfg, name)
            lines.append(f"{name} = {'none' if val is None else val}")
        lines.append("")
    return "\n".join(lines)


def experiment_digest(cfg):
    return hashlib.sha256(render_experiment_config(cfg).encode()).hexdigest()


def model_config_from(cfg, init_seed=None):
    shape = STATE_SHAPES[cfg.family]
    spatial = len(shape) > 1
    return ModelConfig(
        family=cfg.family,
        layers=cfg.layers,
        width=cfg.width,
        modes=cfg.modes,
        context_dim=cfg.context_dim,
        activation=cfg.activation,
        partition=cfg.partition,
        cross_p=cfg.cross_p,
        cross_q=cfg.cross_q,
        low_fraction=cfg.low_fraction,
        contexts_enabled=cfg.contexts_enabled,
        spectral_axis="spatial_2d" if spatial else "latent_1d",
        state_channels=shape[0],
        grid_side=GRID_SIDE if spatial else None,
        init_seed=cfg.seed if init_seed is None else init_seed,
    )


def train_settings_from(cfg):
    return TrainSettings(
        steps=cfg.train_steps,
        lr=cfg.lr,
        weight_decay=cfg.weight_decay,
        lr_context=cfg.lr_context,
        warmup_steps=cfg.warmup_steps,
        batch_traj=cfg.batch_traj,
        starts_per_traj=cfg.starts_per_traj,
        horizon_steps=cfg.horizon_steps,
        lam=cfg.lam,
        reg=cfg.reg,
    )


def adapt_settings_from(cfg, steps=None):
    return AdaptSettings(
        steps=cfg.adapt_steps if steps is None else steps,
        lr=cfg.lr,
        lr_context=cfg.lr_context,
        lam=cfg.lam,
        reg=cfg.reg,
        horizon_steps=cfg.horizon_steps,
    )
