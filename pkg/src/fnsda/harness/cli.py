"""Command-line entry point.

Subcommands: generate, verify, train, adapt, eval-inter, eval-extra,
report, gradcheck, spectrum. Run directories are self-describing: the
resolved configuration, dataset digest and checkpoint digest carried in
them suffice to reproduce a run bit-identically.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from ..errors import FnsdaError
from ..dynamics import (
    default_environment_set,
    generate_dataset,
    load_dataset,
    save_dataset,
    verify_dataset,
)
from ..model import gate_values, manual_partition_gate
from ..pipelines import (
    Checkpoint,
    adapt,
    baseline_train_erm,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .config import (
    adapt_settings_from,
    experiment_defaults,
    experiment_digest,
    load_experiment_config,
    model_config_from,
    render_experiment_config,
    train_settings_from,
)
from .evaluate import SurrogateModel, run_inter_trajectory, run_extra_trajectory
from .metrics import merge_reports
from .selftest import run_selftest

PARTITION_FLAGS = {
    "auto": "automatic",
    "low": "low_only",
    "high": "high_only",
    "all-shared": "all_shared",
}


def _parse_partition(value):
    if value in PARTITION_FLAGS:
        return PARTITION_FLAGS[value], 1, 1
    if value.startswith("cross:"):
        parts = value.split(":")
        if len(parts) == 3:
            return "cross", int(parts[1]), int(parts[2])
    raise argparse.ArgumentTypeError(
        f"bad partition {value!r}; use auto|low|high|cross:P:Q|all-shared"
    )


def _common_flags(p):
    p.add_argument("--config", default=None, help="experiment config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--family", choices=("lv", "go", "gs", "ns"), default=None)
    p.add_argument("--partition", default=None, help="auto|low|high|cross:P:Q|all-shared")
    p.add_argument("--reg", choices=("l2", "l1"), default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--activation", choices=("swish", "relu"), default=None)


def _resolve_config(args, fallback_family=None):
    family = args.family
    if family is None and args.config:
        probe = load_experiment_config(args.config, base=None)
        family = probe.family
    if family is None:
        family = fallback_family
    if family is None:
        raise FnsdaError("no family given (use --family or a config file)")
    cfg = experiment_defaults(family)
    if args.config:
        cfg = load_experiment_config(args.config, base=cfg)
        cfg.family = family
    if args.seed is not None:
        cfg.seed = args.seed
    if args.reg is not None:
        cfg.reg = args.reg
    if args.lam is not None:
        cfg.lam = args.lam
    if args.activation is not None:
        cfg.activation = args.activation
    if args.partition is not None:
        name, p, q = _parse_partition(args.partition)
        cfg.partition = name
        cfg.cross_p, cfg.cross_q = p, q
    return cfg


def _write_run_config(cfg, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.txt"), "w") as fh:
        fh.write(render_experiment_config(cfg))


def cmd_generate(args):
    cfg = _resolve_config(args)
    if args.out is None:
        raise FnsdaError("generate needs --out")
    env_set = default_environment_set(cfg.family, n_tr=cfg.n_train_traj, n_ev=cfg.n_eval_traj)
    bundle = generate_dataset(env_set, cfg.seed, substeps=cfg.gen_substeps)
    _write_run_config(cfg, args.out)
    path = os.path.join(args.out, f"{cfg.family}.fnsd")
    digest = save_dataset(bundle, path)
    print(f"wrote {path} sha256={digest[:16]}...")
    return 0


def cmd_verify(args):
    code = 0
    for path in args.paths:
        report = verify_dataset(path)
        status = "ok" if report["ok"] else "FAIL"
        print(
            f"{path}: {status} family={report['family']} envs={report['n_env']} "
            f"trajs={report['n_traj']} sha256={report['sha256'][:16]}... "
            f"sidecar={'match' if report['sidecar_match'] else report['sidecar_match']}"
        )
        for problem in report["problems"]:
            print(f"  problem: {problem}")
            code = 1
        if report["ok"] is False:
            code = 1
    return code


def cmd_train(args):
    bundle = load_dataset(args.data)
    cfg = _resolve_config(args, fallback_family=bundle.environment_set.family)
    if args.epochs is not None:
        cfg.train_steps = args.epochs
    if args.out is None:
        raise FnsdaError("train needs --out")
    model_config = model_config_from(cfg)
    settings = train_settings_from(cfg)
    _write_run_config(cfg, args.out)
    ckpt_path = os.path.join(args.out, "checkpoint.fnsc")
    trainer = baseline_train_erm if args.erm else train
    ckpt, run = trainer(bundle, model_config, settings, cfg.seed, interrupt_path=ckpt_path)
    digest = save_checkpoint(ckpt, ckpt_path)
    with open(os.path.join(args.out, "train_log.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss"])
        for i, v in enumerate(run.loss_history):
            writer.writerow([i, repr(v)])
    print(
        f"wrote {ckpt_path} sha256={digest[:16]}... "
        f"loss {ckpt.meta['loss_first']:.4g} -> {ckpt.meta['loss_last']:.4g}"
    )
    return 0


def cmd_adapt(args):
    ckpt = load_checkpoint(args.checkpoint)
    bundle = load_dataset(args.data)
    cfg = _resolve_config(args, fallback_family=ckpt.config.family)
    if args.epochs is not None:
        cfg.adapt_steps = args.epochs
    if args.out is None:
        raise FnsdaError("adapt needs --out")
    settings = adapt_settings_from(cfg)
    _write_run_config(cfg, args.out)
    adapted = Checkpoint(config=ckpt.config, params=ckpt.params, mean_context=ckpt.mean_context)
    rows = []
    for env_index, trajs in enumerate(bundle.eval):
        if not trajs:
            continue
        spec = bundle.environment_set.all_envs[env_index]
        if args.task == "inter":
            result = adapt(ckpt, trajs[:1], "inter", settings, env_index=env_index)
        else:
            n_ad = int(round(spec.adapt_horizon / spec.dt))
            result = adapt(ckpt, trajs, "extra", settings, adapt_frames=n_ad, env_index=env_index)
        if not result.frozen_intact:
            raise FnsdaError(f"frozen parameters changed while adapting env {env_index}")
        adapted.contexts[env_index] = result.context
        rows.append((env_index, result.loss_history[-1] if result.loss_history else float("nan")))
    path = os.path.join(args.out, "adapted.fnsc")
    save_checkpoint(adapted, path)
    for env_index, loss in rows:
        print(f"env {env_index}: final adaptation loss {loss:.4g}")
    print(f"wrote {path}")
    return 0


def _cmd_eval(args, task):
    ckpt = load_checkpoint(args.checkpoint)
    bundle = load_dataset(args.data)
    cfg = _resolve_config(args, fallback_family=ckpt.config.family)
    if args.epochs is not None:
        cfg.adapt_steps = args.epochs
    if args.out is None:
        raise FnsdaError("evaluation needs --out")
    settings = adapt_settings_from(cfg)
    _write_run_config(cfg, args.out)
    model = SurrogateModel(ckpt)
    run_id = os.path.basename(os.path.normpath(args.out))
    runner = run_inter_trajectory if task == "inter" else run_extra_trajectory
    report = runner(model, bundle, settings, run_id=run_id, config_digest=experiment_digest(cfg))
    report.write_csv(os.path.join(args.out, "report.csv"))
    print(
        f"{task}: aggregate rmse={report.aggregate_rmse:.6g} "
        f"(x1e-2: {report.aggregate_rmse * 100:.3f}) mape={report.aggregate_mape:.6g} "
        f"adapted_params={report.adapted_params}"
    )
    return 0


def cmd_report(args):
    n = merge_reports(args.reports, args.out)
    print(f"wrote {args.out} ({n} run-environment rows)")
    return 0


def cmd_gradcheck(args):
    return 0 if run_selftest(verbose=True) else 1


def cmd_spectrum(args):
    ckpt = load_checkpoint(args.checkpoint)
    config = ckpt.config
    rows = []
    for layer in range(config.layers):
        gate = gate_values(ckpt.params, layer, config).data
        r = ckpt.params[f"layers.{layer}.r_shared"].data
        w = ckpt.params[f"layers.{layer}.w_env"].data
        r_energy = np.sqrt((r**2).sum(axis=(1, 2, 3)))
        w_energy = np.sqrt((w**2).sum(axis=(1, 2, 3, 4)))
        for mode in range(config.modes):
            rows.append((layer, mode, gate[mode], r_energy[mode], w_energy[mode]))
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["layer", "mode", "gate", "shared_energy", "env_energy"])
        for row in rows:
            writer.writerow([row[0], row[1], repr(float(row[2])), repr(float(row[3])), repr(float(row[4]))])
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="fnsda", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a dataset from family defaults")
    _common_flags(p)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("verify", help="check dataset integrity")
    p.add_argument("paths", nargs="+")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("train", help="train on a dataset")
    _common_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--erm", action="store_true", help="pooled baseline without contexts")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("adapt", help="adapt a checkpoint to the eval environments")
    _common_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--task", choices=("inter", "extra"), default="inter")
    p.set_defaults(fn=cmd_adapt)

    p = sub.add_parser("eval-inter", help="one-trajectory adaptation task")
    _common_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(fn=lambda a: _cmd_eval(a, "inter"))

    p = sub.add_parser("eval-extra", help="prefix-adaptation forecasting task")
    _common_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(fn=lambda a: _cmd_eval(a, "extra"))

    p = sub.add_parser("report", help="merge run reports into one CSV")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("gradcheck", help="engine self-test")
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("spectrum", help="dump per-mode gate and weight energies")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_spectrum)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except FnsdaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
