"""Command-line entry point.

Subcommands: ``bvi run <config.json> [--jobs N] [--out DIR]`` executes an
experiment, ``bvi validate <config.json>`` checks a config and echoes the
normalized form, and ``bvi demo <experiment-name>`` emits a canned config.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import BviError
from .experiments import EXPERIMENTS, run_experiment, validate_config

DEMO_CONFIGS = {
    "single_run": {
        "experiment": "single_run",
        "algorithm": "mc_prmm",
        "family": {"kind": "diag_gaussian"},
        "target": {"kind": "gaussian", "d": 2, "kappa": 20.0},
        "alpha": 0.5,
        "tau": 0.8,
        "n_samples": 1000,
        "max_iters": 40,
        "n_replicates": 1,
        "seed": 2,
        "save_params": True,
        "output_dir": "bvi_out/single_run",
    },
    "gaussian_sweep": {
        "experiment": "gaussian_sweep",
        "algorithm": "mc_prmm",
        "family": {"kind": "full_gaussian"},
        "target": {"kind": "gaussian", "d": 5, "kappa": 10.0},
        "alpha": [0.5, 1.0],
        "tau": [0.25, 0.5, 1.0],
        "n_samples": 500,
        "max_iters": 100,
        "n_replicates": 10,
        "seed": 2,
        "output_dir": "bvi_out/gaussian_sweep",
    },
    "sensitivity": {
        "experiment": "sensitivity",
        "family": {"kind": "full_gaussian"},
        "target": {"kind": "gaussian", "d": 5, "kappa": 10.0},
        "alpha": 0.5,
        "tau": [1e-4, 1e-3, 1e-2, 1e-1, 0.5, 1.0],
        "n_samples": 500,
        "max_iters": 100,
        "n_replicates": 10,
        "seed": 3,
        "output_dir": "bvi_out/sensitivity",
    },
    "regression": {
        "experiment": "regression",
        "algorithm": "mc_prmm",
        "family": {"kind": "diag_gaussian"},
        "target": {"kind": "regression", "d": 5, "n_train": 100, "n_test": 50,
                   "sigma2": 0.5, "s": 5.0, "rho": 0.5},
        "alpha": 1.0,
        "tau": 0.1,
        "n_samples": 500,
        "max_iters": 100,
        "n_replicates": 10,
        "seed": 4,
        "regularizer": {"kind": "sparse_mean_l1", "eta": [1.0], "skip_index_0": True},
        "output_dir": "bvi_out/regression",
    },
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bvi",
        description="Experiment harness for regularized divergence "
                    "minimization over exponential families.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a JSON config")
    run_p.add_argument("config", help="path to the config JSON file")
    run_p.add_argument("--jobs", type=int, default=None,
                       help="worker processes for replicate runs")
    run_p.add_argument("--out", default=None, help="override output directory")

    val_p = sub.add_parser("validate", help="validate a config and print the "
                                            "normalized form")
    val_p.add_argument("config", help="path to the config JSON file")

    demo_p = sub.add_parser("demo", help="emit a canned config for an "
                                         "experiment name")
    demo_p.add_argument("name", choices=sorted(DEMO_CONFIGS))
    demo_p.add_argument("--write", default=None,
                        help="write the config to this path instead of stdout")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            cfg = validate_config(args.config)
            print(json.dumps(cfg.to_json(), indent=2))
            return 0
        if args.command == "demo":
            doc = json.dumps(DEMO_CONFIGS[args.name], indent=2)
            if args.write:
                with open(args.write, "w", encoding="utf-8") as fh:
                    fh.write(doc + "\n")
            else:
                print(doc)
            return 0
        if args.command == "run":
            cfg = validate_config(args.config)
            if args.jobs is not None:
                cfg.jobs = args.jobs
            if args.out is not None:
                cfg.output_dir = args.out
            manifest = run_experiment(cfg)
            n = len(manifest["statuses"])
            diverged = sum(1 for s in manifest["statuses"].values()
                           if s == "diverged")
            print(f"wrote {cfg.output_dir} ({n} runs, {diverged} diverged, "
                  f"{manifest['wall_time_s']:.1f}s)")
            return 0
    except BviError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
