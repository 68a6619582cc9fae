"""Command-line front end: run scenarios, presets, self-checks, plot data."""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import (
    PRESETS,
    BatchSummary,
    emit_plot_data,
    load_config,
    preset,
    run_scenario,
)
from .validate import SUITES, run_suite


def _print_aggregates(summary: BatchSummary) -> None:
    kind = summary.config["kind"]
    for method, agg in summary.aggregates.items():
        if kind == "formation" and "formation_error" in agg:
            fe = agg["formation_error"]
            print(
                f"{method}: runs={agg['runs']} diverged={agg['diverged']} "
                f"converged={agg['converged']} "
                f"formation_error median={fe['median']:.6g} "
                f"(q1={fe['q1']:.6g}, q3={fe['q3']:.6g})"
            )
        elif kind == "matching":
            print(
                f"{method}: runs={agg['runs']} "
                f"matched_pairs mean={agg['matched_pairs_mean']:.3f} "
                f"full={agg['full_match_runs']}/{agg['runs']}"
            )
        else:
            print(f"{method}: runs={agg['runs']} diverged={agg['diverged']}")


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    summary = run_scenario(cfg, out_dir=args.out, workers=args.workers)
    _print_aggregates(summary)
    if args.out:
        print(f"artifacts written to {args.out}")
    return 0


def _cmd_preset(args) -> int:
    kwargs = {}
    if args.seeds is not None:
        kwargs["seeds"] = range(args.seeds)
    if args.name == "matching":
        if args.delta_a is not None:
            kwargs["delta_a"] = args.delta_a
        if args.t_final is not None:
            kwargs["t_final"] = args.t_final
    cfg = preset(args.name, **kwargs)
    summary = run_scenario(cfg, out_dir=args.out, workers=args.workers)
    _print_aggregates(summary)
    if args.out:
        print(f"artifacts written to {args.out}")
    return 0


def _cmd_validate(args) -> int:
    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    failed = 0
    for name in names:
        kwargs = {"seed": args.seed}
        if args.samples is not None:
            kwargs["samples"] = args.samples
        report = run_suite(name, **kwargs)
        print(report.line())
        failed += 0 if report.passed else 1
    return 1 if failed else 0


def _cmd_plot_data(args) -> int:
    with open(args.summary) as fh:
        doc = json.load(fh)
    summary = BatchSummary(
        config=doc["config"], runs=doc["runs"], aggregates=doc["aggregates"]
    )
    out = args.out or "."
    for path in emit_plot_data(summary, out):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="swarmgrad",
        description="Distributed gradient controllers over directed proximity networks",
    )
    sub = p.add_subparsers(dest="cmd", required=True)

    runp = sub.add_parser("run", help="run a scenario from a JSON or TOML config")
    runp.add_argument("config")
    runp.add_argument("--out", help="directory for summary, run and plot files")
    runp.add_argument("--workers", type=int, default=None,
                      help="process count (default: SWARMGRAD_WORKERS or 1)")
    runp.set_defaults(fn=_cmd_run)

    prep = sub.add_parser("preset", help="run a named preset study")
    prep.add_argument("name", choices=sorted(PRESETS))
    prep.add_argument("--seeds", type=int, default=None, help="use seeds 0..N-1")
    prep.add_argument("--delta-a", type=float, default=None,
                      help="matching only: long sensing range")
    prep.add_argument("--t-final", type=float, default=None,
                      help="matching only: horizon override")
    prep.add_argument("--out")
    prep.add_argument("--workers", type=int, default=None)
    prep.set_defaults(fn=_cmd_preset)

    valp = sub.add_parser("validate", help="run a randomized self-check suite")
    valp.add_argument("suite", choices=sorted(SUITES) + ["all"])
    valp.add_argument("--samples", type=int, default=None)
    valp.add_argument("--seed", type=int, default=0)
    valp.set_defaults(fn=_cmd_validate)

    plotp = sub.add_parser("plot-data", help="regenerate plot CSVs from a summary.json")
    plotp.add_argument("summary")
    plotp.add_argument("--out", help="output directory (default: current)")
    plotp.set_defaults(fn=_cmd_plot_data)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
