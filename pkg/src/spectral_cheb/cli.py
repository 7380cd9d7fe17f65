"""Command-line surface.

Four subcommands: ``variance-bench`` tabulates the closed-form weighted
variance of the degree distributions over a sweep of expected degrees,
``estimate`` runs one unbiased spectral-sum estimate on a matrix file,
and ``mc-train`` / ``gp-train`` drive the optimization tasks.  A flat
key=value config file supplies defaults; flags override it.  Every CSV
output is byte-stable for a fixed --seed (timing columns are zeroed;
measured times go to stderr).

Exit codes: 1 configuration error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

import numpy as np

from .chebyshev import (
    AnalyticitySpec,
    ChebSeries,
    Interval,
    compute_coefficients,
    estimate_rho,
    series_from_polynomial,
    truncation_error_bound,
)
from ._mp_bench import mp_variance_rows
from .exceptions import (
    ConvergenceError,
    InfiniteVarianceError,
    NumericError,
    ParameterError,
    ParseError,
    SpectralChebError,
)
from .optimize import SGDConfig, SVRGConfig, write_trajectory_csv
from .probes import MatrixOracle, ProbePlan, estimate_spectral_sum_unbiased, load_matrix, power_method_bound
from .tasks import (
    CompletionProblem,
    GPProblem,
    completion_rmse,
    completion_train,
    gp_train,
    load_gp_data,
    make_degree_distribution,
    ratings_from_files,
)

__all__ = ["main", "build_parser"]

EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

BENCH_SWEEP = tuple(range(5, 101, 5))


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def error(self, message):
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key=value defaults file; flags override")
    p.add_argument("--seed", type=int, default=0, help="master seed for all randomness")
    p.add_argument("--out", help="output CSV path")


def _add_function_flags(p: argparse.ArgumentParser):
    p.add_argument("--func", default="log",
                   help="log, sqrt, exp, or poly:c0,c1,... (monomial coefficients)")
    p.add_argument("--a", type=float, help="lower eigenvalue bound")
    p.add_argument("--b", type=float, help="upper eigenvalue bound")
    p.add_argument("--rho", type=float, help="coefficient decay parameter (> 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spectral-cheb",
                     description="Unbiased randomized-Chebyshev spectral-sum toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("variance-bench", parents=[], help="closed-form variance sweep")
    _add_common(bench)
    _add_function_flags(bench)
    bench.add_argument("--dist", help="restrict to one distribution: opt, pois, neg, neg(r), det")
    bench.add_argument("--N", type=int, help="single expected degree instead of the 5..100 sweep")

    est = sub.add_parser("estimate", help="one unbiased spectral-sum estimate")
    _add_common(est)
    _add_function_flags(est)
    est.add_argument("matrix", help="MatrixMarket (.mtx) or dense whitespace matrix file")
    est.add_argument("--dist", default="opt")
    est.add_argument("--N", type=int, default=10, help="expected truncation degree")
    est.add_argument("--M", "--probes", dest="M", type=int, default=10,
                     help="number of Rademacher probes")
    est.add_argument("--degree", type=int, help="fixed degree for --dist det")
    est.add_argument("--epsilon", type=float, default=0.01,
                     help="default lower eigenvalue bound when --a is absent")

    for name in ("mc-train", "gp-train"):
        train = sub.add_parser(name, help=f"run the {name.split('-')[0]} task")
        _add_common(train)
        train.add_argument("--train", required=False, help="training data file")
        train.add_argument("--test", help="held-out data file (mc: explicit test ratings)")
        train.add_argument("--optimizer", default="sgd", choices=["sgd", "svrg"])
        train.add_argument("--dist", default="opt")
        train.add_argument("--rho", type=float)
        train.add_argument("--N", type=int, default=10)
        train.add_argument("--M", "--probes", dest="M", type=int, default=8)
        train.add_argument("--epochs", type=int, default=4, help="svrg outer epochs; sgd blocks")
        train.add_argument("--inner-iters", dest="inner_iters", type=int, default=100)
        train.add_argument("--step", type=float, default=0.1)
        train.add_argument("--step-decay", dest="step_decay", type=float, default=0.97)
        train.add_argument("--lambda", dest="lam", type=float, default=1.0,
                           help="data-fit weight (mc)")
        train.add_argument("--epsilon", type=float, help="diagonal smoothing (mc)")
        train.add_argument("--rank", type=int, default=10, help="post-training SVD rank (mc)")
    return parser


def _apply_config_file(argv: list[str], parser: argparse.ArgumentParser) -> list[str]:
    """Read --config key=value defaults and splice them before the flags."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise ParameterError("--config needs a file path")
    path = Path(argv[idx + 1])
    if not path.exists():
        raise ParameterError(f"config file not found: {path}")
    injected: list[str] = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        injected += [f"--{key.strip().replace('_', '-')}", value.strip()]
    # defaults go right after the subcommand so explicit flags win
    return argv[:1] + injected + argv[1:]


def _parse_function(args) -> tuple:
    """(name, callable-or-coeffs, interval, default-kind)"""
    func = args.func
    if func.startswith("poly:"):
        try:
            coeffs = [float(c) for c in func[5:].split(",")]
        except ValueError as exc:
            raise ParameterError(f"cannot parse polynomial coefficients in {func!r}") from exc
        return "poly", coeffs, None
    if func not in ("log", "sqrt", "exp"):
        raise ParameterError(f"unknown function {func!r}")
    return func, {"log": np.log, "sqrt": np.sqrt, "exp": np.exp}[func], None


def _bench_interval(fname: str, args) -> Interval:
    if args.a is not None and args.b is not None:
        return Interval(args.a, args.b)
    if fname in ("log", "sqrt"):
        return Interval(0.05, 0.95)
    if fname == "exp":
        return Interval(-1.0, 1.0)
    raise ParameterError("custom polynomial needs explicit --a and --b")


def _parse_dist_name(spec: str) -> tuple[str, float]:
    spec = spec.strip()
    if spec.startswith("neg(") and spec.endswith(")"):
        return "neg", float(spec[4:-1])
    if spec in ("opt", "pois", "det"):
        return spec, 5.0
    if spec == "neg":
        return "neg", 5.0
    raise ParameterError(f"unknown degree distribution {spec!r}")


def _build_series(fname, f_or_coeffs, interval, degree):
    if fname == "poly":
        return series_from_polynomial(f_or_coeffs, interval, degree=degree)
    return compute_coefficients(f_or_coeffs, interval, degree)


def cmd_variance_bench(args) -> int:
    if args.out is None:
        raise ParameterError("variance-bench needs --out for the CSV file")
    fname, f_or_coeffs, _ = _parse_function(args)
    interval = _bench_interval(fname, args)
    if args.dist:
        dist_specs = [_parse_dist_name(args.dist)]
    else:
        dist_specs = [("opt", 5.0), ("pois", 5.0), ("neg", 2.0), ("neg", 5.0),
                      ("neg", 10.0), ("det", 5.0)]
    if any(kind == "opt" for kind, _ in dist_specs) and args.rho is None:
        raise ParameterError("the optimal distribution needs --rho")
    sweep = [args.N] if args.N else list(BENCH_SWEEP)
    # the sweep reaches degrees whose true variances sit far below what
    # double precision can represent, so the bench evaluates the closed
    # form in extended precision
    payload = f_or_coeffs if fname == "poly" else None
    rows = mp_variance_rows(fname, payload, interval, dist_specs, sweep, args.rho)
    lines = ["function,distribution,N,weighted_variance"]
    for label, mean_n, text in rows:
        lines.append(f"{fname},{label},{mean_n},{text}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"wrote {len(lines) - 1} rows to {args.out}", file=sys.stderr)
    return 0


def cmd_estimate(args) -> int:
    matrix_path = Path(args.matrix)
    if not matrix_path.exists():
        raise FileNotFoundError(f"matrix file not found: {matrix_path}")
    matrix = load_matrix(matrix_path)
    dim = matrix.shape[0]
    fname, f_or_coeffs, _ = _parse_function(args)
    probe_oracle = MatrixOracle(dim=dim, matvec=lambda x: matrix @ x,
                                eig_interval=Interval(0.0, 1.0))
    if args.b is not None:
        upper = args.b
    else:
        upper = power_method_bound(probe_oracle, 50, args.seed)
    lower = args.a if args.a is not None else args.epsilon
    interval = Interval(lower, upper)
    oracle = MatrixOracle(dim=dim, matvec=lambda x: matrix @ x, eig_interval=interval)
    kind, neg_r = _parse_dist_name(args.dist)
    degree_cap = max(4 * args.N + 120, (args.degree or 0) + 1, 60)
    series = _build_series(fname, f_or_coeffs, interval, degree_cap)
    rho = args.rho
    if rho is None:
        try:
            rho = estimate_rho(series, args.N, min(3 * args.N + 20, series.degree))
        except SpectralChebError:
            rho = None
    if kind == "det":
        mean_degree = args.degree if args.degree is not None else args.N
    else:
        mean_degree = args.N
    if kind == "opt" and rho is None:
        raise ParameterError("cannot estimate rho for the optimal distribution; pass --rho")
    dist = make_degree_distribution(kind, mean_degree, rho=rho, neg_r=neg_r)
    plan = ProbePlan(args.seed, args.M)
    value = estimate_spectral_sum_unbiased(oracle, series, dist, plan)
    print(repr(float(value)))
    print(f"sampled degree n = {plan.degree_sample}", file=sys.stderr)
    print(f"probes M = {args.M}", file=sys.stderr)
    if rho is not None:
        j = np.arange(series.degree + 1, dtype=float)
        big_u = float(np.max(np.abs(series.coeffs) * rho**j)) / 2.0
        bound = dim * truncation_error_bound(AnalyticitySpec(rho, big_u), mean_degree)
        print(
            f"fixed-degree-{mean_degree} bias bound: {bound:.6g} "
            f"(rho = {rho:.6g}, U ~ {big_u:.6g})",
            file=sys.stderr,
        )
    return 0


def _write_metrics_csv(path, rows):
    lines = ["iter,objective,rmse_or_nll,wallclock_ms"]
    for i, (objective, metric) in enumerate(rows):
        lines.append(f"{i},{objective!r},{metric!r},0")
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_mc_train(args) -> int:
    if args.train is None:
        raise ParameterError("mc-train needs --train")
    if not Path(args.train).exists():
        raise FileNotFoundError(f"training data not found: {args.train}")
    if args.test is not None and not Path(args.test).exists():
        raise FileNotFoundError(f"test data not found: {args.test}")
    if args.out is None:
        raise ParameterError("mc-train needs --out for the metrics CSV")
    started = time.perf_counter()
    ratings = ratings_from_files(args.train, args.test, seed=args.seed)
    rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(11,)))
    theta0 = rng.uniform(0.0, 5.0, size=(ratings.d_users, ratings.d_items))
    mean_rating = float(ratings.ratings.mean())
    epsilon = args.epsilon if args.epsilon is not None else 1e-2 * mean_rating**2
    problem = CompletionProblem(theta0, epsilon=epsilon, lam=args.lam)
    kind, neg_r = _parse_dist_name(args.dist)
    total_iters = args.epochs * args.inner_iters
    if args.optimizer == "sgd":
        cfg = SGDConfig(T=total_iters, M=args.M, N=args.N, master_seed=args.seed,
                        step_rule="exp_decay", step0=args.step, decay=args.step_decay)
    else:
        cfg = SVRGConfig(S=args.epochs, T=args.inner_iters, eta=args.step, M=args.M,
                         N=args.N, master_seed=args.seed)
    result = completion_train(problem, ratings, cfg, optimizer=args.optimizer,
                              dist_kind=kind, neg_r=neg_r, svd_rank=args.rank)
    rows = [
        (rec.objective_estimate, completion_rmse(rec.theta, ratings, train=False))
        for rec in result.records
    ]
    _write_metrics_csv(args.out, rows)
    with open(Path(args.out).with_suffix(".trajectory.csv"), "w") as fh:
        write_trajectory_csv(result.records, fh)
    np.savetxt(str(Path(args.out).with_suffix(".theta.txt")), result.theta, fmt="%.17g")
    elapsed = time.perf_counter() - started
    print(
        f"{args.optimizer}: test RMSE {result.test_rmse:.6g} "
        f"(initial {result.initial_test_rmse:.6g}), {result.matvecs} matvecs, "
        f"{elapsed:.2f}s",
        file=sys.stderr,
    )
    return 0


def cmd_gp_train(args) -> int:
    if args.train is None:
        raise ParameterError("gp-train needs --train")
    if not Path(args.train).exists():
        raise FileNotFoundError(f"training data not found: {args.train}")
    if args.out is None:
        raise ParameterError("gp-train needs --out for the metrics CSV")
    started = time.perf_counter()
    x, y = load_gp_data(args.train)
    spread = float(np.std(y)) or 1.0
    width = float(np.ptp(x)) or 1.0
    theta0 = np.array([0.3 * spread, spread, 0.25 * width])
    gp = GPProblem(x, y, theta0)
    cfg = SGDConfig(T=args.epochs * args.inner_iters, M=args.M, N=args.N,
                    master_seed=args.seed, step_rule="exp_decay",
                    step0=args.step, decay=args.step_decay)
    result = gp_train(gp, cfg)
    rows = [
        (rec.objective_estimate, float(nll))
        for rec, nll in zip(result.records, result.nll_curve[1:])
    ]
    _write_metrics_csv(args.out, rows)
    with open(Path(args.out).with_suffix(".trajectory.csv"), "w") as fh:
        write_trajectory_csv(result.records, fh)
    np.savetxt(str(Path(args.out).with_suffix(".theta.txt")), result.theta, fmt="%.17g")
    elapsed = time.perf_counter() - started
    print(
        f"sgd: NLL {result.nll_curve[-1]:.6g} (initial {result.nll_curve[0]:.6g}), "
        f"hyperparameters {np.array2string(result.theta, precision=4)}, {elapsed:.2f}s",
        file=sys.stderr,
    )
    return 0


_COMMANDS = {
    "variance-bench": cmd_variance_bench,
    "estimate": cmd_estimate,
    "mc-train": cmd_mc_train,
    "gp-train": cmd_gp_train,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(argv, parser)
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (NumericError, InfiniteVarianceError, ConvergenceError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ParameterError, SpectralChebError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
