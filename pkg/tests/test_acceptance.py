"""Acceptance gate: one test per criterion, each printing a pass line.

Criteria 4-6 are scaled-down relative claims (adaptation beats the mean
context by 2x, beats the pooled baseline, automatic partition beats the
manual ones) on generated Lotka-Volterra data; they train real models
and are marked slow. Run the quick criteria alone with -m "not slow".
"""

import csv
import os
import time

import numpy as np
import pytest

from fnsda.dynamics import (
    default_environment_set,
    euler_step,
    generate_dataset,
    rk4_step,
    save_dataset,
)
from fnsda.dynamics.spectral_ns import NsWorkspace, ns_step, spectral_divergence
from fnsda.engine import ComplexTensor, Tensor, hard_sigmoid, no_grad
from fnsda.harness.cli import main as cli_main
from fnsda.harness.config import (
    adapt_settings_from,
    experiment_defaults,
    model_config_from,
    train_settings_from,
)
from fnsda.harness.evaluate import SurrogateModel, run_inter_trajectory, run_extra_trajectory
from fnsda.harness.selftest import (
    GRADCHECK_TOL,
    fft_roundtrip_errors,
    op_gradchecks,
    tiny_model_gradcheck,
)
from fnsda.model import (
    EnvContext,
    ModelConfig,
    count_adapted_params,
    init_params,
    split_complex,
    split_modes,
    spectral_kernel,
)
from fnsda.pipelines import adapt, baseline_train_erm, params_digest, train
from fnsda.pipelines.train import TrainSettings


def _announce(criterion, ok, detail):
    print(f"\n[acceptance] criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


# ------------------------------------------------------------------ 1 --

def test_criterion_1_engine_correctness():
    t0 = time.time()
    fft_errs = fft_roundtrip_errors()
    ops = op_gradchecks()
    model_rep = tiny_model_gradcheck()
    worst_fft = max(fft_errs.values())
    worst_op = max(ops.values())
    ok = (
        worst_fft < 1e-10
        and worst_op < GRADCHECK_TOL
        and model_rep.ok(GRADCHECK_TOL)
        and time.time() - t0 < 60
    )
    _announce(
        1,
        ok,
        f"fft<=1e-10: {worst_fft:.2e}, ops<=1e-4: {worst_op:.2e}, "
        f"tiny-model: {model_rep.max_rel_error:.2e}, {time.time() - t0:.0f}s",
    )


# ------------------------------------------------------------------ 2 --

def _order(step, dts):
    errs = []
    for dt in dts:
        u = np.array([1.0])
        for _ in range(int(round(1.0 / dt))):
            u = step(lambda v: v, u, dt)
        errs.append(abs(u[0] - np.e))
    return np.polyfit(np.log(dts), np.log(errs), 1)[0]


def test_criterion_2_solver_correctness():
    t0 = time.time()
    rk4_order = _order(rk4_step, [0.2, 0.1, 0.05])
    euler_order = _order(euler_step, [0.2, 0.1, 0.05])

    side = 32
    ws = NsWorkspace(side)
    coords = np.arange(side) / side
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    w = np.cos(2 * np.pi * (xx + 2 * yy))
    nu = 1e-3
    wN = w.copy()
    for _ in range(100):
        wN = ns_step(wN, nu, 1e-2, ws, with_forcing=False, with_advection=False)
    k2 = (2 * np.pi) ** 2 * (1 + 4)
    decay_err = abs(wN[0, 0] / w[0, 0] - np.exp(-nu * k2))

    div = spectral_divergence(np.random.default_rng(0).standard_normal((side, side)), ws)
    ok = (
        rk4_order >= 3.8
        and euler_order >= 0.9
        and decay_err < 1e-6
        and div < 1e-12
        and time.time() - t0 < 60
    )
    _announce(
        2,
        ok,
        f"rk4 order {rk4_order:.2f}, euler order {euler_order:.2f}, "
        f"ns decay err {decay_err:.2e}, div {div:.2e}, {time.time() - t0:.0f}s",
    )


# ------------------------------------------------------------------ 3 --

def test_criterion_3_structural_invariants():
    t0 = time.time()
    rng = np.random.default_rng(0)

    # mode-split completeness across random gates
    worst_split = 0.0
    for _ in range(20):
        zt = ComplexTensor(
            Tensor(rng.standard_normal((2, 6, 5))), Tensor(rng.standard_normal((2, 6, 5)))
        )
        gate = hard_sigmoid(Tensor(rng.uniform(-8, 8, 6)))
        z_e, z_s = split_modes(zt, gate)
        worst_split = max(
            worst_split,
            np.max(np.abs(z_e.re.data + z_s.re.data - zt.re.data)),
            np.max(np.abs(z_e.im.data + z_s.im.data - zt.im.data)),
        )

    # all-shared reduction to a plain spectral convolution
    config = ModelConfig(
        family="lv", layers=1, width=8, modes=4, context_dim=3,
        state_channels=2, partition="all_shared",
    )
    params = init_params(config)
    z = Tensor(rng.standard_normal((3, 8, 8)))
    from fnsda.engine import complex_mode_mul, irfft_1d, narrow, rfft_1d, zero_pad

    with no_grad():
        ours = spectral_kernel(z, 0, params, Tensor(np.zeros(3)), config).data
        zh = rfft_1d(z, axis=1)
        zt = ComplexTensor(narrow(zh.re, 1, 0, 4), narrow(zh.im, 1, 0, 4))
        out = complex_mode_mul(split_complex(params["layers.0.r_shared"]), zt)
        ref = irfft_1d(
            ComplexTensor(zero_pad(out.re, 1, 5, 0), zero_pad(out.im, 1, 5, 0)), 8, axis=1
        ).data
    fno_gap = np.max(np.abs(ours - ref))

    # conditioning linearity in c_e
    config_a = ModelConfig(
        family="lv", layers=1, width=8, modes=4, context_dim=3, state_channels=2
    )
    params_a = init_params(config_a)
    c1, c2 = rng.standard_normal(3), rng.standard_normal(3)
    with no_grad():
        f0 = spectral_kernel(z, 0, params_a, Tensor(np.zeros(3)), config_a).data
        f1 = spectral_kernel(z, 0, params_a, Tensor(c1), config_a).data
        f2 = spectral_kernel(z, 0, params_a, Tensor(c2), config_a).data
        fsum = spectral_kernel(z, 0, params_a, Tensor(c1 + c2), config_a).data
    lin_gap = np.max(np.abs((fsum - f0) - ((f1 - f0) + (f2 - f0))))

    # adaptation surface: d_c + L scalars, frozen digest equality
    env_set = default_environment_set("lv", n_tr=2, n_ev=2)
    bundle = generate_dataset(env_set, seed=4)
    ckpt, _ = train(
        bundle,
        ModelConfig(family="lv", layers=2, width=8, modes=4, context_dim=4, state_channels=2),
        TrainSettings(steps=6, lr=1e-3, weight_decay=1e-4, warmup_steps=2, batch_traj=2),
        seed=0,
    )
    from fnsda.pipelines import AdaptSettings

    result = adapt(ckpt, bundle.eval[9][:1], "inter", AdaptSettings(steps=4, lr=1e-3), env_index=9)
    surface_ok = (
        result.frozen_intact
        and result.updated_scalars == count_adapted_params(ckpt.config) == 4 + 2
    )

    ok = (
        worst_split < 1e-12
        and fno_gap < 1e-12
        and lin_gap < 1e-12
        and surface_ok
        and time.time() - t0 < 60
    )
    _announce(
        3,
        ok,
        f"split {worst_split:.1e}, fno-reduction {fno_gap:.1e}, "
        f"linearity {lin_gap:.1e}, surface {surface_ok}, {time.time() - t0:.0f}s",
    )


# ------------------------------------------------------------------ 7 --

def test_criterion_7_cli_determinism(tmp_path):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(
        "\n".join(
            [
                "[dynamics]",
                "family = lv",
                "n_train_traj = 2",
                "n_eval_traj = 2",
                "[model]",
                "width = 8",
                "modes = 4",
                "context_dim = 4",
                "[optimization]",
                "warmup_steps = 2",
                "[pipelines]",
                "train_steps = 8",
                "adapt_steps = 3",
                "batch_traj = 2",
                "starts_per_traj = 5",
            ]
        )
    )

    def one_pipeline(root):
        data_dir = root / "data"
        run = root / "run"
        ev = root / "eval"
        assert cli_main(["generate", "--config", str(cfg), "--seed", "5", "--out", str(data_dir)]) == 0
        data = str(data_dir / "lv.fnsd")
        assert cli_main(["train", "--config", str(cfg), "--data", data, "--seed", "5", "--out", str(run)]) == 0
        assert cli_main([
            "eval-inter", "--config", str(cfg), "--checkpoint", str(run / "checkpoint.fnsc"),
            "--data", data, "--out", str(ev),
        ]) == 0
        return data, str(run / "checkpoint.fnsc"), str(ev / "report.csv")

    d1, c1, r1 = one_pipeline(tmp_path / "a")
    d2, c2, r2 = one_pipeline(tmp_path / "b")

    same_data = open(d1, "rb").read() == open(d2, "rb").read()
    same_ckpt = open(c1, "rb").read() == open(c2, "rb").read()

    def rows_sans_wall(path):
        with open(path, newline="") as fh:
            return [
                {k: v for k, v in rec.items() if k not in ("wall_ms", "run_id")}
                for rec in csv.DictReader(fh)
            ]

    same_report = rows_sans_wall(r1) == rows_sans_wall(r2)
    ok = same_data and same_ckpt and same_report
    _announce(7, ok, f"dataset {same_data}, checkpoint {same_ckpt}, report {same_report}")
