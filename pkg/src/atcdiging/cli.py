"""Command-line entry point: ``atcdiging run|bounds|plot``."""

import argparse
import sys

from . import bench
from .errors import ConfigError
from .solvers import RunTrace

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3


def _cmd_run(args):
    config = bench.load_config(args.config)
    result = bench.run_experiment(config, args.output_dir)
    for row in result.summary:
        rate = row["measured_rate"]
        rate = "n/a" if rate is None else f"{rate:.6f}"
        print(f"{row['algorithm']:>10} seed={row['seed']} status={row['status']} "
              f"iters={row['iterations']} final={row['final_normalized_residual']:.3e} "
              f"rate={rate} E[kappa_D]={row['mean_kappa_D']:.3f}")
    print(f"wrote {result.summary_path}")
    return EXIT_DIVERGED if result.diverged else EXIT_OK


def _cmd_bounds(args):
    config = bench.load_config(args.config)
    res = bench.run_bound_suite(config, args.output_dir)
    feasible = res.feasible_rows
    bad = [r for r in feasible if not r.within_bound]
    print(f"{len(feasible)} feasible grid points, {len(res.rows) - len(feasible)} infeasible, "
          f"{len(bad)} above the theoretical rate")
    print(f"wrote {res.rate_csv}")
    print(f"wrote {res.complexity_csv}")
    return EXIT_OK


def _cmd_plot(args):
    traces = []
    for path in args.csv:
        try:
            traces.append(RunTrace.read_csv(path))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
    bench.emit_plot(traces, args.output)
    print(f"wrote {args.output}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="atcdiging", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the experiment described by a TOML config")
    p.add_argument("config")
    p.add_argument("--output-dir", help=f"overrides the config and ${bench.OUTPUT_ENV}")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("bounds", help="compare measured rates with the theoretical ones")
    p.add_argument("config")
    p.add_argument("--output-dir", help=f"overrides the config and ${bench.OUTPUT_ENV}")
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("plot", help="plot residual CSV traces to an SVG file")
    p.add_argument("csv", nargs="+")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
