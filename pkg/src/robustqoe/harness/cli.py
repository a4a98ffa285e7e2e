"""Command-line entry point: ``robustqoe <experiment> [options]``.

Exit status is 0 when every gate check passes, 1 when one fails and 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from ..dataio import read_points
from ..geometry import NonConvergenceError, geometric_quantile
from .config import ConfigError, annotate, load_config
from .experiments import RUNNERS

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

_HELP = {
    "clt": "asymptotic normality of the component-wise QoE",
    "sweep": "QoE and raw estimator errors across contamination rates",
    "geomq": "geometric-quantile solver against a brute-force grid",
    "functional": "point-wise median of Brownian paths",
    "squantile": "sample quantile under contamination",
    "conc": "geometric-median concentration bound",
    "lemv": "parameter adjustment for modified points",
    "bahadur": "linearisation residual of the geometric median",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits with 2 already; keep the message terse
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--config", help="TOML or JSON experiment config")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--csv", help="write per-replication rows (or the summary table) here")
    p.add_argument("--threads", type=int, default=1, help="worker threads for replications")
    p.add_argument("--timing", action="store_true", help="include wall-clock time in the report")
    p.add_argument("--quiet", action="store_true", help="print only the verdict")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="robustqoe", description="Quantile-of-estimators experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in _HELP.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    solve = sub.add_parser("solve", help="geometric quantile of the points in a CSV file")
    solve.add_argument("--points", required=True, help="CSV with one point per row, optional header")
    solve.add_argument("--u", default=None, help="comma-separated direction, default 0")
    solve.add_argument("--json", action="store_true", help="print the full solver result as JSON")
    return parser


def _solve(args) -> int:
    try:
        pts = read_points(args.points)
        u = np.zeros(pts.shape[1]) if args.u is None else np.array([float(x) for x in args.u.split(",")])
        res = geometric_quantile(pts, u)
    except (OSError, ValueError) as exc:
        print(f"robustqoe solve: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"robustqoe solve: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if args.json:
        print(
            json.dumps(
                {
                    "point": res.point.tolist(),
                    "weights": res.weights.tolist(),
                    "residual": res.residual,
                    "iterations": res.iterations,
                    "status": res.status.value,
                    "anchor": res.anchor,
                    "unique": res.unique,
                },
                indent=2,
            )
        )
    else:
        print(",".join(f"{v:.17g}" for v in res.point + 0.0))
    return EXIT_PASS


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "solve":
        return _solve(args)
    if args.threads < 1:
        print("robustqoe: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    overrides = {} if args.seed is None else {"seed": args.seed}
    try:
        cfg = load_config(args.config, args.command, overrides)
        start = time.perf_counter()
        report = RUNNERS[args.command](cfg, threads=args.threads)
    except ConfigError as exc:
        print(f"robustqoe: configuration error: {annotate(exc, args.config)}", file=sys.stderr)
        return EXIT_CONFIG
    if args.timing:
        report.wall_clock = time.perf_counter() - start
    if not args.quiet:
        for line in report.notes:
            print(f"note: {line}")
        for check in report.checks:
            print(check.line())
    print(f"{args.command}: {'PASS' if report.passed else 'FAIL'}")
    if args.out:
        report.write_json(args.out)
    if args.csv:
        report.write_csv(args.csv)
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
