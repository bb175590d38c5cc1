"""Command-line entry point.

Subcommands: denoiser-sweep, forward-sweep, chain-run, validate.
Exit codes: 0 success, 1 validation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError
from .experiments import (
    ExperimentSpec,
    run_chain_experiment,
    run_denoiser_sweep,
    run_forward_sweep,
    write_chain_run,
    write_results,
)
from .validation import run_validation_suite


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", help="experiment config file (JSON)")
    parser.add_argument("--seed", type=int, default=None, help="override master seed")
    parser.add_argument("--out", default=None, help="override output directory")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--n-steps", type=int, default=None)
    parser.add_argument("--n-sub", type=int, default=None)
    parser.add_argument("--n-repeats", type=int, default=None)
    parser.add_argument("--save-chains", action="store_true",
                        help="also persist reference/floor chain samples as CSV")
    parser.add_argument("--no-figures", action="store_true")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pnpula")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("denoiser-sweep", "forward-sweep", "chain-run"):
        _add_common(sub.add_parser(name))
    val = sub.add_parser("validate")
    val.add_argument("--fault-inject", action="store_true",
                     help="perturb the closed-form denoiser to demonstrate oracle sensitivity")
    val.add_argument("--seed", type=int, default=20240)
    val.add_argument("--out", default=None, help="write the JSON report here")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    out: dict = {}
    if args.seed is not None:
        out["seed"] = args.seed
    if args.out is not None:
        out["out"] = args.out
    if args.n_steps is not None:
        out["n_steps"] = args.n_steps
    return out


def _metric_overrides(spec: ExperimentSpec, args: argparse.Namespace) -> None:
    if args.n_sub is not None:
        spec.metric.n_sub = args.n_sub
    if args.n_repeats is not None:
        spec.metric.n_repeats = args.n_repeats


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "validate":
        report = run_validation_suite(seed=args.seed, fault_injection=args.fault_inject)
        for line in report.lines():
            print(line)
        if args.out:
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            Path(args.out).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        return 0 if report.passed else 1

    try:
        spec = ExperimentSpec.from_file(args.config, overrides=_overrides(args))
        _metric_overrides(spec, args)
        if spec.out_dir is None:
            raise ConfigError("no output directory: set 'out' in the config or pass --out")

        if args.command == "chain-run":
            chain = run_chain_experiment(spec)
            write_chain_run(chain, spec.out_dir)
            if not args.no_figures:
                from .plots import render_chain_figure

                render_chain_figure(chain, spec.out_dir)
            print(f"wrote {chain.n} samples to {spec.out_dir}")
            return 0

        runner = run_denoiser_sweep if args.command == "denoiser-sweep" else run_forward_sweep
        result = runner(spec, workers=args.workers, keep_chains=args.save_chains)
        write_results(result, spec.out_dir)
        if not args.no_figures:
            from .plots import render_sweep_figures

            render_sweep_figures(result, spec.out_dir)
        for key, value in sorted(result.summary.items()):
            print(f"{key}: {value}")
        print(f"wrote results to {spec.out_dir}")
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
