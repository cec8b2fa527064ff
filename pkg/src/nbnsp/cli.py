"""Command-line interface.

Exit codes: 0 success, 1 usage or flag errors, 2 data or parse errors,
3 numerical or convergence failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .errors import DataError, NumericalError
from .estimate import (
    QmleConfig,
    default_box,
    kernel_ccf,
    qmle_fit,
    quasi_log_likelihood,
)
from .io import (
    expand_scenarios,
    load_run_config,
    params_to_dict,
    parse_params,
    read_pattern,
    write_pattern,
)
from .model import cross_correlation
from .simulate import PointPattern, simulate_nbnsp

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    # usage problems are exit code 1, distinct from data (2) and numerics (3)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _grid_spec(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid must be min:max:step")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None
    if step <= 0.0:
        raise argparse.ArgumentTypeError("grid step must be positive")
    if hi < lo:
        raise argparse.ArgumentTypeError("grid max must be >= min")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def _positive_float(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number {text!r}") from None
    if not x > 0.0:
        raise argparse.ArgumentTypeError("value must be positive")
    return x


def _load_params_file(path: str):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return parse_params(doc, path)


def _write_or_print(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def cmd_simulate(args) -> int:
    config = load_run_config(args.config)
    if config.sim is None:
        raise DataError(f"{args.config}: needs a sim section")
    pattern = simulate_nbnsp(config.sim, args.seed)
    write_pattern(pattern, args.out)
    T = pattern.horizon
    print(
        f"n1={pattern.n1} n2={pattern.n2} horizon={T!r} "
        f"rate1={pattern.n1 / T!r} rate2={pattern.n2 / T!r}"
    )
    return 0


def _qmle_from_args(args) -> QmleConfig:
    if args.config is not None:
        config = load_run_config(args.config)
        qmle = config.qmle if config.qmle is not None else QmleConfig()
    else:
        qmle = QmleConfig()
    if args.kernel is not None:
        if qmle.box is not None and qmle.model() != args.kernel:
            raise DataError(
                f"--kernel {args.kernel} conflicts with the config's box"
            )
        if qmle.box is None:
            qmle = replace(qmle, box=default_box(args.kernel))
    if args.r is not None:
        qmle = replace(qmle, r=args.r)
    return qmle


def cmd_fit(args) -> int:
    pattern = read_pattern(args.pattern, args.horizon)
    qmle = _qmle_from_args(args)
    fit = qmle_fit(pattern, qmle)
    doc = {
        "theta_hat": params_to_dict(fit.theta_hat),
        "lambda_hat1": fit.lambda_hat1,
        "lambda_hat2": fit.lambda_hat2,
        "objective": fit.objective,
        "n_pairs": fit.n_pairs,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "grad_norm_fd": fit.grad_norm_fd,
    }
    _write_or_print(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


def cmd_ccf(args) -> int:
    pattern = read_pattern(args.pattern, args.horizon)
    grid = args.grid
    r_edge = args.r_edge if args.r_edge is not None else 1.0
    table = kernel_ccf(pattern, grid, h=args.h, r_edge=r_edge)
    theta = _load_params_file(args.theta) if args.theta else None
    lines = []
    if theta is None:
        lines.append("u,g_hat")
        for u, g in table:
            lines.append(f"{float(u)!r},{float(g)!r}")
    else:
        # the model correlation may diverge at exactly u = 0; report nan there
        nonzero = grid != 0.0
        overlay = np.full(grid.size, np.nan)
        if nonzero.any():
            overlay[nonzero] = cross_correlation(theta, grid[nonzero])
        lines.append("u,g_hat,g_theory")
        for (u, g), gt in zip(table, overlay):
            lines.append(f"{float(u)!r},{float(g)!r},{float(gt)!r}")
    _write_or_print("\n".join(lines) + "\n", args.out)
    return 0


def cmd_mc(args) -> int:
    from .experiments import run_scenario

    config = load_run_config(args.config)
    scenarios = expand_scenarios(config)
    threads = args.threads
    os.makedirs(args.out_dir, exist_ok=True)
    for scenario in scenarios:
        report = run_scenario(scenario, threads=threads)
        base = os.path.join(args.out_dir, scenario.label)
        with open(base + ".csv", "w") as fh:
            fh.write(report.to_csv())
        with open(base + ".json", "w") as fh:
            fh.write(report.to_json() + "\n")
        print(report.format_table())
        print()
    return 0


def cmd_prep(args) -> int:
    t1, t2 = [], []
    offset = 0.0
    for i, path in enumerate(args.sessions):
        side = path + ".json"
        horizon = None if os.path.exists(side) else _session_fallback(path)
        pat = read_pattern(path, horizon)
        t1.append(pat.times1 + offset)
        t2.append(pat.times2 + offset)
        offset += pat.horizon
        if i < len(args.sessions) - 1:
            offset += args.concat_gap
    merged = PointPattern(
        times1=np.concatenate(t1) if t1 else np.empty(0),
        times2=np.concatenate(t2) if t2 else np.empty(0),
        horizon=offset,
    )
    write_pattern(merged, args.out)
    print(f"n1={merged.n1} n2={merged.n2} horizon={merged.horizon!r}")
    return 0


def _session_fallback(path: str) -> float:
    # sidecar-less session: horizon defaults to the last event time
    last = 0.0
    with open(path) as fh:
        fh.readline()
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) == 2:
                try:
                    last = max(last, float(parts[1]))
                except ValueError:
                    pass
    if last <= 0.0:
        raise DataError(f"{path}: cannot infer a horizon, add a sidecar")
    return last


def cmd_loglik(args) -> int:
    pattern = read_pattern(args.pattern, args.horizon)
    theta = _load_params_file(args.theta)
    qmle = QmleConfig(r=args.r, min_lag=args.min_lag)
    h = quasi_log_likelihood(pattern, theta, qmle)
    print(repr(h))
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="nbnsp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a pattern from a config")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit by quasi-maximum likelihood")
    p.add_argument("pattern")
    p.add_argument("config", nargs="?", default=None)
    p.add_argument("--kernel", choices=("gamma", "exp"), default=None)
    p.add_argument("--horizon", type=_positive_float, default=None)
    p.add_argument("--r", type=_positive_float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("ccf", help="empirical kernel cross-correlation")
    p.add_argument("pattern")
    p.add_argument("--grid", type=_grid_spec, required=True)
    p.add_argument("--h", type=_positive_float, default=0.001)
    p.add_argument("--r-edge", dest="r_edge", type=_positive_float, default=None)
    p.add_argument("--theta", default=None)
    p.add_argument("--horizon", type=_positive_float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_ccf)

    p = sub.add_parser("mc", help="Monte Carlo study from a config")
    p.add_argument("config")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker processes (default: NBNSP_THREADS or 1)",
    )
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("prep", help="concatenate session CSVs with gaps")
    p.add_argument("sessions", nargs="+")
    p.add_argument("--concat-gap", dest="concat_gap", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("loglik", help="evaluate the objective once")
    p.add_argument("pattern")
    p.add_argument("--theta", required=True)
    p.add_argument("--r", type=_positive_float, default=1.0)
    p.add_argument("--min-lag", dest="min_lag", type=float, default=0.0)
    p.add_argument("--horizon", type=_positive_float, default=None)
    p.set_defaults(func=cmd_loglik)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
