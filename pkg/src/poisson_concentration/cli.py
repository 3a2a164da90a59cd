"""Command line: ``run``, ``list`` and ``validate``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import load_config
from .errors import CertificateError, ConfigurationError
from .experiments import RECIPES, list_experiments, recipe_config, run_experiment, write_outputs


def _load(target: str) -> dict:
    if target in RECIPES and not Path(target).exists():
        return recipe_config(target)
    return load_config(target)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="poisson-concentration",
                                     description="Concentration experiments for Poisson functionals.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment from a TOML file or a built-in recipe name")
    run.add_argument("config")
    run.add_argument("--seed", type=int, default=None, help="override master_seed")
    run.add_argument("--out", default=None, help="output directory (default: output_dir from the config)")
    run.add_argument("--threads", type=int, default=1, help="worker threads for replications")
    sub.add_parser("list", help="list built-in recipes")
    val = sub.add_parser("validate", help="check a config file against the schema")
    val.add_argument("config")
    args = parser.parse_args(argv)

    if args.command == "list":
        sys.stdout.write(list_experiments())
        return 0
    try:
        cfg = _load(args.config)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.command == "validate":
        print(f"ok: {cfg['kind']}")
        return 0

    try:
        result = run_experiment(cfg, seed=args.seed, workers=max(1, args.threads))
    except (ConfigurationError, CertificateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir = args.out or cfg["output_dir"]
    try:
        write_outputs(result, out_dir)
    except OSError as exc:
        print(f"error: cannot write outputs to {out_dir}: {exc.strerror}", file=sys.stderr)
        return 2
    for a in result.assertions:
        print(f"{'PASS' if a.passed else 'FAIL'}  {a.name}" + (f"  ({a.detail})" if a.detail else ""))
    print(f"outputs written to {out_dir}")
    return 0 if result.passed else 1


if __name__ == "__main__":
    sys.exit(main())
