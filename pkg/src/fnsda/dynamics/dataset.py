"""Multi-environment trajectory datasets and their binary file format.

Layout (all little-endian):

    magic "FNSD" | u32 version | u8 family tag | u32 n_env
    per env:   u32 n_params, then per param: u16 name_len, utf-8 name, f64 value
    per env:   per split in (train, eval): u32 n_traj, then per trajectory:
               u64 seed, f64 dt, u8 rank, u32 dims[rank], f64 data row-major

Reserved "__"-prefixed parameter names carry the temporal grid and grid
descriptor so a SystemSpec round-trips exactly. A sha256 of the payload
is written next to the file as ``<name>.sha256``; ``verify`` recomputes
it together with the structural invariants.

Every trajectory draws its RNG stream from (dataset seed, env index,
split, trajectory index), so generation is reproducible regardless of
batching or worker count.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DataFormatError, IntegrationError
from . import kernels, spectral_ns
from .sampling import sample_initial_condition
from .systems import FAMILIES, EnvironmentSet, SystemSpec
from .systems import STATE_SHAPES

FORMAT_MAGIC = b"FNSD"
FORMAT_VERSION = 1
FAMILY_TAGS = {name: i for i, name in enumerate(FAMILIES)}

# Internal substeps per recorded frame; accuracy/stability margins for
# each family's stiffness at its recording grid.
GEN_SUBSTEPS = {"lv": 10, "go": 50, "gs": 40, "ns": 100}


@dataclass
class Trajectory:
    env_index: int
    states: np.ndarray  # [n_steps+1, *state_shape]
    dt: float
    seed: int


@dataclass
class DatasetBundle:
    environment_set: EnvironmentSet
    train: list = field(default_factory=list)  # per train env: list[Trajectory]
    eval: list = field(default_factory=list)  # per eval env: list[Trajectory]
    version: int = FORMAT_VERSION

    def env_of(self, env_index):
        return self.environment_set.all_envs[env_index]


def _traj_rng(dataset_seed, env_index, split, traj_index):
    ss = np.random.SeedSequence(
        entropy=int(dataset_seed), spawn_key=(env_index, split, traj_index)
    )
    seed64 = int(ss.generate_state(1, np.uint64)[0])
    return np.random.Generator(np.random.PCG64(seed64)), seed64


def _integrate_env(spec, ics, substeps):
    """Integrate a batch of initial conditions for one environment."""
    n_frames = spec.n_steps
    if spec.family == "lv":
        return kernels.rollout_lv(ics, spec.params, spec.dt, substeps, n_frames)
    if spec.family == "go":
        return kernels.rollout_go(ics, spec.params, spec.dt, substeps, n_frames)
    if spec.family == "gs":
        inv_ds2 = 1.0 / spec.grid_spacing**2
        return kernels.rollout_gs(ics, spec.params, inv_ds2, spec.dt, substeps, n_frames)
    if spec.family == "ns":
        frames = spectral_ns.rollout_ns(
            ics[:, 0], spec.params["visc"], spec.dt, substeps, n_frames
        )
        return frames[:, :, np.newaxis, :, :]
    raise ConfigError(f"unknown family {spec.family!r}")


def _generate_env_split(spec, env_index, split_id, wanted, seed, substeps):
    trajs = []
    if not wanted:
        return trajs
    ics = []
    seeds = []
    for ti in range(wanted):
        rng, seed64 = _traj_rng(seed, env_index, split_id, ti)
        ics.append(sample_initial_condition(spec.family, rng, spec))
        seeds.append(seed64)
    frames = _integrate_env(spec, np.stack(ics), substeps)
    for ti in range(wanted):
        states = np.ascontiguousarray(frames[:, ti])
        if not np.all(np.isfinite(states)):
            finite = np.all(np.isfinite(states), axis=tuple(range(1, states.ndim)))
            bad = int(np.argmin(finite))
            raise IntegrationError(
                f"env {env_index} trajectory {ti}: non-finite state "
                f"at frame {bad} (t={bad * spec.dt:g})"
            )
        trajs.append(Trajectory(env_index=env_index, states=states, dt=spec.dt, seed=seeds[ti]))
    return trajs


def generate_dataset(env_set, seed, substeps=None):
    """Integrate every trajectory of every environment; deterministic.

    ``bundle.train[i]`` / ``bundle.eval[i]`` are indexed by the global
    environment index; train environments carry an empty eval list and
    vice versa under the default grids.
    """
    substeps = substeps if substeps is not None else GEN_SUBSTEPS[env_set.family]
    bundle = DatasetBundle(environment_set=env_set)
    n_train_env = len(env_set.train_envs)
    for env_index, spec in enumerate(env_set.all_envs):
        is_train_env = env_index < n_train_env
        n_train = env_set.n_tr if is_train_env else 0
        n_eval = 0 if is_train_env else env_set.n_ev
        bundle.train.append(
            _generate_env_split(spec, env_index, 0, n_train, seed, substeps)
        )
        bundle.eval.append(
            _generate_env_split(spec, env_index, 1, n_eval, seed, substeps)
        )
    return bundle


def _spec_param_table(spec):
    table = dict(spec.params)
    table["__dt"] = spec.dt
    table["__horizon"] = spec.horizon
    table["__adapt_horizon"] = spec.adapt_horizon
    if spec.grid_side is not None:
        table["__grid_side"] = float(spec.grid_side)
        table["__grid_spacing"] = spec.grid_spacing
    return table


def _spec_from_table(family, table):
    params = {k: v for k, v in table.items() if not k.startswith("__")}
    side = table.get("__grid_side")
    return SystemSpec(
        family=family,
        params=params,
        dt=table["__dt"],
        horizon=table["__horizon"],
        adapt_horizon=table["__adapt_horizon"],
        grid_side=int(side) if side is not None else None,
        grid_spacing=table.get("__grid_spacing"),
    )


def save_dataset(bundle, path):
    """Serialize atomically (temp file + rename) and write a sha256 sidecar."""
    env_set = bundle.environment_set
    chunks = [FORMAT_MAGIC, struct.pack("<IB", bundle.version, FAMILY_TAGS[env_set.family])]
    envs = env_set.all_envs
    chunks.append(struct.pack("<I", len(envs)))
    for env_index, spec in enumerate(envs):
        table = _spec_param_table(spec)
        chunks.append(struct.pack("<I", len(table)))
        for name in sorted(table):
            raw = name.encode("utf-8")
            chunks.append(struct.pack("<H", len(raw)) + raw + struct.pack("<d", table[name]))
        for split in (bundle.train, bundle.eval):
            trajs = split[env_index] if env_index < len(split) else []
            chunks.append(struct.pack("<I", len(trajs)))
            for traj in trajs:
                states = np.ascontiguousarray(traj.states, dtype=np.float64)
                chunks.append(struct.pack("<Qd", traj.seed, traj.dt))
                chunks.append(struct.pack("<B", states.ndim))
                chunks.append(struct.pack(f"<{states.ndim}I", *states.shape))
                chunks.append(states.astype("<f8").tobytes())
    payload = b"".join(chunks)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)
    digest = hashlib.sha256(payload).hexdigest()
    with open(path + ".sha256", "w") as fh:
        fh.write(digest + "\n")
    return digest


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def read(self, fmt):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.buf):
            raise DataFormatError("truncated dataset file")
        out = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += size
        return out

    def read_bytes(self, n):
        if self.pos + n > len(self.buf):
            raise DataFormatError("truncated dataset file")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out


def load_dataset(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    r = _Reader(buf)
    if r.read_bytes(4) != FORMAT_MAGIC:
        raise DataFormatError(f"{path}: bad magic, not a dataset file")
    version, family_tag = r.read("<IB")
    if version != FORMAT_VERSION:
        raise DataFormatError(f"{path}: unsupported format version {version}")
    families = {v: k for k, v in FAMILY_TAGS.items()}
    if family_tag not in families:
        raise DataFormatError(f"{path}: unknown family tag {family_tag}")
    family = families[family_tag]
    (n_env,) = r.read("<I")
    specs = []
    per_env_splits = []
    for env_index in range(n_env):
        (n_params,) = r.read("<I")
        table = {}
        for _ in range(n_params):
            (name_len,) = r.read("<H")
            name = r.read_bytes(name_len).decode("utf-8")
            (value,) = r.read("<d")
            table[name] = value
        spec = _spec_from_table(family, table)
        specs.append(spec)
        splits = []
        for _split_id in range(2):
            (n_traj,) = r.read("<I")
            trajs = []
            for _ in range(n_traj):
                seed64, dt = r.read("<Qd")
                (rank,) = r.read("<B")
                dims = r.read(f"<{rank}I")
                count = int(np.prod(dims))
                data = np.frombuffer(r.read_bytes(count * 8), dtype="<f8").reshape(dims)
                trajs.append(
                    Trajectory(env_index=env_index, states=np.ascontiguousarray(data), dt=dt, seed=seed64)
                )
            splits.append(trajs)
        per_env_splits.append(splits)
    if r.pos != len(buf):
        raise DataFormatError(f"{path}: {len(buf) - r.pos} trailing bytes")
    is_eval = [bool(sp[1]) and not sp[0] for sp in per_env_splits]
    if any(a and not b for a, b in zip(is_eval, is_eval[1:])):
        raise DataFormatError(f"{path}: eval environments must follow train environments")
    train_envs = [s for s, ev in zip(specs, is_eval) if not ev]
    eval_envs = [s for s, ev in zip(specs, is_eval) if ev]
    n_tr = max((len(sp[0]) for sp in per_env_splits), default=0)
    n_ev = max((len(sp[1]) for sp in per_env_splits), default=0)
    env_set = EnvironmentSet(
        family=family, train_envs=train_envs, eval_envs=eval_envs, n_tr=n_tr, n_ev=n_ev
    )
    bundle = DatasetBundle(environment_set=env_set, version=version)
    bundle.train = [sp[0] for sp in per_env_splits]
    bundle.eval = [sp[1] for sp in per_env_splits]
    return bundle


def verify_dataset(path):
    """Recompute the payload digest and check structural invariants.

    Returns a dict report; raises DataFormatError on malformed files.
    """
    with open(path, "rb") as fh:
        payload = fh.read()
    digest = hashlib.sha256(payload).hexdigest()
    sidecar = path + ".sha256"
    digest_match = None
    if os.path.exists(sidecar):
        with open(sidecar) as fh:
            digest_match = fh.read().strip() == digest
    bundle = load_dataset(path)
    env_set = bundle.environment_set
    problems = []
    shapes = set()
    n_traj = 0
    for split in (bundle.train, bundle.eval):
        for env_index, trajs in enumerate(split):
            for ti, traj in enumerate(trajs):
                n_traj += 1
                if traj.env_index >= len(env_set.all_envs):
                    problems.append(f"trajectory {ti} points at missing env {traj.env_index}")
                if not np.all(np.isfinite(traj.states)):
                    problems.append(f"env {env_index} traj {ti}: non-finite states")
                shapes.add(traj.states.shape[1:])
    if len(shapes) > 1:
        problems.append(f"inhomogeneous state shapes: {sorted(shapes)}")
    if shapes and next(iter(shapes)) != STATE_SHAPES[env_set.family]:
        problems.append(
            f"state shape {next(iter(shapes))} != family shape {STATE_SHAPES[env_set.family]}"
        )
    train_keys = {s.param_tuple() for s in env_set.train_envs}
    eval_keys = {s.param_tuple() for s in env_set.eval_envs}
    if train_keys & eval_keys:
        problems.append("train/eval environment parameters overlap")
    return {
        "path": path,
        "sha256": digest,
        "sidecar_match": digest_match,
        "family": env_set.family,
        "n_env": len(env_set.all_envs),
        "n_traj": n_traj,
        "problems": problems,
        "ok": not problems and digest_match is not False,
    }
