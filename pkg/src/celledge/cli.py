"""Command-line entry points: run, sweep, bench.

Exit codes: 0 success, 2 configuration error, 3 solver abort.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .innersolver import SolverAbort


def _add_common(p):
    p.add_argument("--config", help="path to a JSON run configuration")
    p.add_argument("--preset", help="named preset (fig1, fig2, fig3, fig4, fig5, fig7, fig8, table1)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--trials", type=int, help="override experiment.trials")
    p.add_argument("--seed", type=int, help="override experiment.seed")
    p.add_argument("--threads", type=int, default=1, help="trial worker threads")
    p.add_argument("--set", action="append", default=[], metavar="PATH=JSON",
                   help="override any config field, e.g. --set experiment.kq=2")


def _overrides(args):
    out = {}
    if args.trials is not None:
        out["experiment.trials"] = args.trials
    if args.seed is not None:
        out["experiment.seed"] = args.seed
    for item in args.set:
        path, _, raw = item.partition("=")
        if not _:
            raise harness.ConfigError("--set", f"expected PATH=JSON, got {item!r}")
        try:
            out[path] = json.loads(raw)
        except json.JSONDecodeError:
            out[path] = raw
    return out


def build_parser():
    parser = argparse.ArgumentParser(prog="celledge",
                                     description="percentile-throughput network optimization")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one experiment config")
    _add_common(run_p)

    sweep_p = sub.add_parser("sweep", help="re-run a config across parameter values")
    _add_common(sweep_p)
    sweep_p.add_argument("--param", required=True, help="dotted config path to vary")
    sweep_p.add_argument("--values", required=True,
                         help="comma-separated JSON values, e.g. 0,10,100")

    bench_p = sub.add_parser("bench", help="compare numba kernels with the numpy fallback")
    bench_p.add_argument("--users", type=int, default=35)
    bench_p.add_argument("--rx", type=int, default=2)
    bench_p.add_argument("--tx", type=int, default=8)
    bench_p.add_argument("--power-users", type=int, default=140)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "bench":
            from .benchmark import format_benchmark, run_benchmark
            rows = run_benchmark(k=args.users, n=args.rx, m=args.tx,
                                 k_power=args.power_users)
            print(format_benchmark(rows))
            return 0
        cfg = harness.load_config(args.config, args.preset, _overrides(args))
        if args.command == "run":
            result = harness.run(cfg, threads=args.threads)
            paths = harness.emit(result, args.out)
            mean = result.summary["objective_mbps"]["mean"]
            print(f"run {cfg.run_id}: {cfg.trials} trials, "
                  f"mean objective {mean:.4f} Mbps -> {args.out}")
            for p in paths:
                print(f"  wrote {p}")
        else:
            values = [json.loads(v) for v in args.values.split(",")]
            for value, result in harness.sweep(cfg, args.param, values, args.threads):
                sub_out = f"{args.out}/{args.param.replace('.', '_')}={value}"
                harness.emit(result, sub_out)
                mean = result.summary["objective_mbps"]["mean"]
                print(f"{args.param}={value}: mean objective {mean:.4f} Mbps -> {sub_out}")
        return 0
    except harness.ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except SolverAbort as err:
        print(f"solver abort: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
