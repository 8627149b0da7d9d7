"""Command line entry point: ``dcgd train | toy-map | geometry-selftest | report``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from dcgd.harness import records, stats, toy
from dcgd.harness.config import ConfigError, ExperimentConfig, default_seed, load_config_file
from dcgd.harness.selftest import run_selftest
from dcgd.harness.training import run_trials, trial_summary
from dcgd.optimizers import OPTIMIZERS, VARIANTS
from dcgd.problems import PROBLEMS

log = logging.getLogger("dcgd")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dcgd", description="Dual cone gradient descent for PINNs")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a PINN and record per-step geometry")
    t.add_argument("--problem", default="helmholtz2d", choices=sorted(PROBLEMS))
    t.add_argument("--optimizer", default="dcgd", choices=OPTIMIZERS)
    t.add_argument("--variant", default="center", choices=sorted(VARIANTS))
    t.add_argument("--epochs", type=int, default=50_000)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--nr", type=int, default=1280)
    t.add_argument("--nb", type=int, default=128)
    t.add_argument("--hidden", type=int, nargs="+", default=None, help="hidden layer widths")
    t.add_argument("--seed", type=int, default=None, help="default: $DCGD_SEED or 0")
    t.add_argument("--trials", type=int, default=1)
    t.add_argument("--out", default="runs/train")
    t.add_argument("--config", help="JSON file whose keys override the flags")

    m = sub.add_parser("toy-map", help="Pareto-convergence map on the toy objective")
    m.add_argument("--grid", type=int, default=8)
    m.add_argument("--steps", type=int, default=100_000)
    m.add_argument("--variant", default="center", choices=sorted(VARIANTS))
    m.add_argument("--optimizer", default="dcgd-gd", choices=("dcgd-gd", "dcgd", "adam", "gd"))
    m.add_argument("--lr", type=float, default=2e-3)
    m.add_argument("--out", default="runs/toy")
    m.add_argument("--config", help="JSON file whose keys override the flags")

    s = sub.add_parser("geometry-selftest", help="randomized dual-cone property checks")
    s.add_argument("--n", type=int, default=100_000, help="pairs per dimension")
    s.add_argument("--seed", type=int, default=None)

    r = sub.add_parser("report", help="gradient statistics of a recorded run")
    r.add_argument("run_dir")
    r.add_argument("--trial", type=int, default=0)
    return p


def _overrides(args, keys) -> dict:
    if not getattr(args, "config", None):
        return {}
    data = load_config_file(args.config)
    unknown = set(data) - set(keys)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def cmd_train(args) -> int:
    flags = dict(problem=args.problem, optimizer=args.optimizer, variant=args.variant,
                 epochs=args.epochs, lr=args.lr, n_r=args.nr, n_b=args.nb, hidden=args.hidden,
                 seed=default_seed() if args.seed is None else args.seed,
                 trials=args.trials, out=args.out)
    keys = set(ExperimentConfig.__dataclass_fields__)
    flags.update(_overrides(args, keys))
    cfg = ExperimentConfig(**flags)
    recs = run_trials(cfg)
    out = records.write_run(cfg.out, cfg.to_dict(), cfg.run_id(), recs)
    summary = trial_summary(recs)
    print(json.dumps({"run_id": cfg.run_id(), "out": str(out), "relative_l2": summary}))
    return 0


def cmd_toy_map(args) -> int:
    params = dict(grid=args.grid, steps=args.steps, variant=args.variant,
                  optimizer=args.optimizer, lr=args.lr, out=args.out)
    params.update(_overrides(args, params))
    res = toy.run_toy(toy.grid_starts(params["grid"]), params["steps"], params["optimizer"],
                      params["variant"], params["lr"])
    out = Path(params["out"])
    out.mkdir(parents=True, exist_ok=True)
    fail = res.pareto >= toy.PARETO_TOL
    table = np.column_stack([res.starts, res.final, res.pareto, fail.astype(float)])
    np.savetxt(out / "toy_map.csv", table, delimiter=",", fmt="%.17g", comments="",
               header="theta1_start,theta2_start,theta1_final,theta2_final,pareto_measure,failed")
    with open(out / "meta.jsonl", "a") as fh:
        fh.write(json.dumps({"config": params, "n_starts": len(res.starts),
                             "n_failures": int(fail.sum())}, sort_keys=True) + "\n")
    print(f"{int(fail.sum())} of {len(res.starts)} starts failed (pareto_measure >= {toy.PARETO_TOL:g})")
    for s in res.failures:
        print(f"  failed start ({s[0]:.4f}, {s[1]:.4f})")
    return 0


def cmd_selftest(args) -> int:
    seed = default_seed() if args.seed is None else args.seed
    results = run_selftest(args.n, seed)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def cmd_report(args) -> int:
    _, recs = records.read_run(args.run_dir)
    print(stats.format_report(stats.gradient_stats_report(recs[args.trial])))
    return 0


COMMANDS = {"train": cmd_train, "toy-map": cmd_toy_map, "geometry-selftest": cmd_selftest,
            "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
