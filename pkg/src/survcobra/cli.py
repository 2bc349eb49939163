"""Batch command-line front end.

    survcobra bench     --config cfg.json [--seed N] [--out DIR] [--jobs N]
    survcobra simulate  --config cfg.json [--seed N] [--out DIR]
    survcobra tune      --config cfg.json [--seed N] [--out DIR]
    survcobra relevance --config cfg.json [--seed N] [--out DIR]

Exit codes: 0 success, 1 configuration or input error, 2 internal error.
Report files land in the output directory only after the computation
finished, and rerunning with the same config and seed reproduces them
byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from .exceptions import ConfigError, TuningError
from .experiments import (
    load_config,
    run_bench,
    run_relevance,
    run_simulate,
    run_tune,
    write_bench_reports,
    write_relevance_reports,
    write_run_metadata,
    write_tune_reports,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="survcobra",
        description="Survival-curve ensemble experiments: benchmark, tune, simulate, relevance.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("bench", "cross-validated benchmark of the base learners and the ensemble"),
        ("simulate", "synthetic-population covariate-relevance study"),
        ("tune", "random search over (epsilon, alpha, l_fraction)"),
        ("relevance", "covariate-relevance study on a CSV dataset"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="experiment config (JSON)")
        cmd.add_argument("--seed", type=int, default=None, help="override the master seed")
        cmd.add_argument("--out", default=None, help="override the output directory")
        cmd.add_argument("--jobs", type=int, default=None, help="parallel workers (bench folds)")
    return parser


def _raw_config(cfg) -> dict:
    """The effective config echoed into run.json (overrides applied)."""
    with open(cfg, encoding="utf-8") as fh:
        return json.load(fh)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = cfg.with_overrides(seed=args.seed, out_dir=args.out, jobs=args.jobs)
        raw = _raw_config(args.config)
        if args.seed is not None:
            raw["seed"] = int(args.seed)
        out = Path(cfg.out_dir)

        if args.command == "bench":
            results = run_bench(cfg, raw)
            write_bench_reports(cfg, results, out)
            write_run_metadata(cfg, "bench", raw, out, extra={"folds": cfg.folds})
        elif args.command == "tune":
            best, trace = run_tune(cfg)
            write_tune_reports(cfg, best, trace, out)
            write_run_metadata(cfg, "tune", raw, out, extra={"trials": len(trace)})
        elif args.command == "simulate":
            model, params, study, curves, tuning = run_simulate(cfg)
            names = model.split.d_l.feature_names
            write_relevance_reports(cfg, names, study, curves, out)
            if tuning is not None:
                write_tune_reports(cfg, tuning[0], tuning[1], out)
            write_run_metadata(cfg, "simulate", raw, out, extra=_params_extra(params))
        else:
            model, params, study, curves, tuning = run_relevance(cfg)
            names = model.split.d_l.feature_names
            write_relevance_reports(cfg, names, study, curves, out)
            if tuning is not None:
                write_tune_reports(cfg, tuning[0], tuning[1], out)
            write_run_metadata(cfg, "relevance", raw, out, extra=_params_extra(params))
    except (ConfigError, OSError, ValueError, TuningError) as exc:
        print(f"survcobra: error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2
    return 0


def _params_extra(params) -> dict:
    return {
        "epsilon": params.epsilon,
        "alpha": params.alpha,
        "l_fraction": params.l_fraction,
    }


if __name__ == "__main__":
    sys.exit(main())
