"""Command-line interface: simulate trajectories, generate datasets, run
experiments, and reproduce the full result grid.

Output root resolution: an explicit --out-dir wins, then the CHAOSID_OUT
environment variable, then ./chaosid-out. A JSON config file may override
generation and training defaults; explicit flags override the config.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    run_experiment,
    write_error_growth_csv,
    write_metrics_csv,
    write_pdf_csv,
    write_uncertainty_csv,
)
from .datagen import (
    ExperimentConfig,
    ParameterPrior,
    experiment_grid,
    generate_dataset,
    load_dataset,
    save_dataset,
)
from .exceptions import ChaosidError, ConfigurationError
from .lorenz96 import L96Params, integrate, random_initial_state

_MODEL_CHOICES = ("gp", "mlp", "lr")

# config-file keys accepted by _load_config
_CONFIG_KEYS = {
    "prior",
    "n_sims",
    "snapshot_len",
    "snapshots_per_sim",
    "holdout_sims",
    "n_keep",
    "n_discard",
    "bins",
    "horizon_mtu",
    "gp",
    "mlp",
    "n_jobs",
}


def _out_root(flag_value) -> Path:
    if flag_value:
        return Path(flag_value)
    env = os.environ.get("CHAOSID_OUT")
    if env:
        return Path(env)
    return Path("chaosid-out")


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"config file {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigurationError(f"config file {path}: expected a JSON object")
    unknown = set(cfg) - _CONFIG_KEYS
    if unknown:
        raise ConfigurationError(
            f"config file {path}: unknown keys {sorted(unknown)}"
        )
    return cfg


def _build_config(experiment_id: int, seed: int, overrides: dict) -> ExperimentConfig:
    base = experiment_grid(master_seed=seed)[experiment_id - 1]
    fields = {
        k: overrides[k]
        for k in (
            "n_sims",
            "snapshot_len",
            "snapshots_per_sim",
            "holdout_sims",
            "n_keep",
            "n_discard",
        )
        if k in overrides
    }
    return replace(base, **fields) if fields else base


def _build_prior(overrides: dict) -> ParameterPrior:
    return ParameterPrior(**overrides.get("prior", {}))


def _config_key(config: ExperimentConfig, prior: ParameterPrior) -> str:
    payload = {
        "config": {
            "id": config.id,
            "K": config.K,
            "J": config.J,
            "F": config.F,
            "regime": config.regime.value,
            "n_sims": config.n_sims,
            "snapshot_len": config.snapshot_len,
            "snapshots_per_sim": config.snapshots_per_sim,
            "dt": config.dt,
            "n_keep": config.n_keep,
            "n_discard": config.n_discard,
            "holdout_sims": config.holdout_sims,
            "master_seed": config.master_seed,
        },
        "prior": {
            "h_low": prior.h_low,
            "h_high": prior.h_high,
            "b_value": prior.b_value,
            "c_value": prior.c_value,
        },
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _cached_dataset(config, prior, root: Path, n_jobs: int):
    cache_dir = root / "datasets" / _config_key(config, prior)
    if (cache_dir / "manifest.json").exists():
        return load_dataset(cache_dir)
    ds = generate_dataset(config, prior, n_jobs=n_jobs)
    save_dataset(ds, cache_dir)
    return ds


def _cmd_simulate(args) -> int:
    params = L96Params(
        K=args.K, J=args.J, F=args.F, b=args.b, c=args.c, h=args.coupling
    )
    rng = np.random.default_rng(np.random.SeedSequence((args.seed, 0)))
    initial = random_initial_state(params, rng)
    traj = integrate(initial, params, args.dt, n_keep=args.steps, n_discard=0)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    times = traj.times()
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time"] + [f"x{k + 1}" for k in range(params.K)])
        for i, state in enumerate(traj.states):
            writer.writerow(
                [repr(float(times[i]))] + [repr(float(v)) for v in state.X]
            )
    print(f"wrote {out}")
    return 0


def _cmd_gen_data(args) -> int:
    overrides = _load_config(args.config)
    config = _build_config(args.experiment, args.seed, overrides)
    prior = _build_prior(overrides)
    ds = generate_dataset(config, prior, n_jobs=overrides.get("n_jobs", 1))
    out_dir = _out_root(args.out_dir)
    save_dataset(ds, out_dir)
    print(
        f"wrote {out_dir}/train.csv ({len(ds.train_targets)} rows), "
        f"{out_dir}/test.csv ({len(ds.test_targets)} rows)"
    )
    return 0


def _run_one(experiment_id, seed, models, overrides, root: Path) -> dict:
    """Run one experiment into root/exp<id>; returns its manifest."""
    started = time.time()
    config = _build_config(experiment_id, seed, overrides)
    prior = _build_prior(overrides)
    stage = "dataset"
    try:
        dataset = _cached_dataset(config, prior, root, overrides.get("n_jobs", 1))
        stage = "fit/analysis"
        result = run_experiment(
            config,
            prior,
            dataset,
            models=models,
            bins=overrides.get("bins", 20),
            horizon_mtu=overrides.get("horizon_mtu", 2.0),
            gp_params=overrides.get("gp"),
            mlp_params=overrides.get("mlp"),
        )
        stage = "write"
        exp_dir = root / f"exp{experiment_id}"
        exp_dir.mkdir(parents=True, exist_ok=True)
        outputs = []
        write_metrics_csv(exp_dir / "metrics.csv", result.metrics)
        outputs.append("metrics.csv")
        write_pdf_csv(exp_dir / "pdf.csv", result.pdf)
        outputs.append("pdf.csv")
        write_error_growth_csv(exp_dir / "error_growth.csv", result.growth)
        outputs.append("error_growth.csv")
        if result.uncertainty is not None:
            write_uncertainty_csv(exp_dir / "uncertainty.csv", result.uncertainty)
            outputs.append("uncertainty.csv")
        manifest = {
            "tool_version": __version__,
            "experiment_id": experiment_id,
            "master_seed": seed,
            "models": list(models),
            "prior": {
                "h_low": prior.h_low,
                "h_high": prior.h_high,
                "b_value": prior.b_value,
                "c_value": prior.c_value,
            },
            "gp_hyperparameters": result.gp_hyper,
            "wall_clock_seconds": round(time.time() - started, 3),
            "outputs": outputs,
        }
        with (exp_dir / "manifest.json").open("w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return {"experiment": experiment_id, "ok": True, "metrics": result.metrics}
    except ChaosidError as exc:
        raise ChaosidError(f"experiment {experiment_id}, stage {stage}: {exc}") from exc


def _cmd_run(args) -> int:
    overrides = _load_config(args.config)
    root = _out_root(args.out_dir)
    _run_one(args.experiment, args.seed, args.models, overrides, root)
    print(f"wrote {root}/exp{args.experiment}")
    return 0


def _cmd_reproduce_all(args) -> int:
    overrides = _load_config(args.config)
    models = args.models
    root = _out_root(args.out_dir)
    failures = []
    summary_rows = []
    for experiment_id in range(1, 9):
        try:
            outcome = _run_one(experiment_id, args.seed, models, overrides, root)
        except ChaosidError as exc:
            print(f"experiment {experiment_id} failed: {exc}", file=sys.stderr)
            failures.append({"experiment": experiment_id, "error": str(exc)})
            continue
        for name, row in outcome["metrics"].items():
            summary_rows.append(
                (experiment_id, name, row.mse, row.mae, row.r2,
                 row.bhattacharyya, row.pearson)
            )
    with (root / "summary.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["experiment", "model", "mse", "mae", "r2", "bhattacharyya", "pearson"]
        )
        order = {m: i for i, m in enumerate(_MODEL_CHOICES)}
        summary_rows.sort(key=lambda r: (r[0], order[r[1]]))
        for row in summary_rows:
            writer.writerow(
                [row[0], row[1]] + [repr(float(v)) for v in row[2:]]
            )
    manifest = {
        "tool_version": __version__,
        "master_seed": args.seed,
        "experiments": list(range(1, 9)),
        "failures": failures,
        "outputs": ["summary.csv"] + [f"exp{i}" for i in range(1, 9)],
    }
    with (root / "manifest.json").open("w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {root}/summary.csv ({len(summary_rows)} rows)")
    if failures:
        print(f"{len(failures)} experiment(s) failed", file=sys.stderr)
        return 1
    return 0


def _models_arg(spec: str):
    """argparse type for --models, so bad values are usage errors."""
    names = [m.strip() for m in spec.split(",") if m.strip()]
    for m in names:
        if m not in _MODEL_CHOICES:
            raise argparse.ArgumentTypeError(
                f"unknown model {m!r}; choose from {', '.join(_MODEL_CHOICES)}"
            )
    if not names:
        raise argparse.ArgumentTypeError("at least one model required")
    return tuple(names)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chaosid",
        description=(
            "Estimate the slow-fast coupling of the two-level Lorenz-96 "
            "system from short trajectory snapshots."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"chaosid {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="integrate one trajectory to CSV")
    sim.add_argument("--K", type=int, default=8, help="slow-variable count")
    sim.add_argument("--J", type=int, default=8, help="fast variables per slow")
    sim.add_argument("--F", type=float, default=10.0, help="forcing")
    sim.add_argument("--b", type=float, default=10.0, help="fast amplitude")
    sim.add_argument("--c", type=float, default=10.0, help="timescale ratio")
    sim.add_argument(
        "--coupling", type=float, default=1.0, help="slow-fast coupling h"
    )
    sim.add_argument("--dt", type=float, default=0.005, help="step size")
    sim.add_argument("--steps", type=int, default=1000, help="rows to write")
    sim.add_argument("--seed", type=int, default=0, help="initial-state seed")
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.set_defaults(func=_cmd_simulate)

    gen = sub.add_parser("gen-data", help="generate one experiment dataset")
    gen.add_argument(
        "--experiment", type=int, required=True, choices=range(1, 9),
        metavar="1..8", help="experiment id",
    )
    gen.add_argument("--seed", type=int, default=0, help="master seed")
    gen.add_argument("--out-dir", default=None, help="output directory")
    gen.add_argument("--config", default=None, help="JSON config overrides")
    gen.set_defaults(func=_cmd_gen_data)

    run = sub.add_parser("run", help="run one experiment end to end")
    run.add_argument(
        "--experiment", type=int, required=True, choices=range(1, 9),
        metavar="1..8", help="experiment id",
    )
    run.add_argument(
        "--models", default=("gp", "mlp", "lr"), type=_models_arg,
        help="comma-separated subset of gp,mlp,lr",
    )
    run.add_argument("--seed", type=int, default=0, help="master seed")
    run.add_argument("--out-dir", default=None, help="output root")
    run.add_argument("--config", default=None, help="JSON config overrides")
    run.set_defaults(func=_cmd_run)

    rep = sub.add_parser("reproduce-all", help="run all 8 experiments")
    rep.add_argument(
        "--models", default=("gp", "mlp", "lr"), type=_models_arg,
        help="comma-separated subset of gp,mlp,lr",
    )
    rep.add_argument("--seed", type=int, default=0, help="master seed")
    rep.add_argument("--out-dir", default=None, help="output root")
    rep.add_argument("--config", default=None, help="JSON config overrides")
    rep.set_defaults(func=_cmd_reproduce_all)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ChaosidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - unexpected failure path
        print(f"unexpected error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
