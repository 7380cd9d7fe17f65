"""End-to-end drivers: smoothed nuclear-norm matrix completion and
Gaussian-process hyperparameter learning.

Completion minimizes tr((theta theta^T + eps I)^(1/2)) plus a weighted
entrywise data fit of the factor against the observed ratings, with the
factor box-constrained to [0, 5].  GP learning minimizes the negative
log marginal likelihood of a dense RBF kernel; the quadratic data term
is handled by conjugate-gradient solves and the log-determinant gradient
by the unbiased spectral estimator.  Both re-bound the spectrum with a
power method on an epoch schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse.linalg

from .chebyshev import (
    ChebSeries,
    Interval,
    compute_coefficients,
    rho_from_endpoint_singularity,
)
from .degree_dist import (
    DegreeDistribution,
    deterministic_distribution,
    negbinomial_distribution,
    optimal_distribution,
    poisson_distribution,
)
from .exceptions import ConvergenceError, ParameterError, ParseError
from .grad_est import LowRankPSD, ParamMatrixOracle
from .optimize import (
    IterationRecord,
    Objective,
    SGDConfig,
    SpectralModel,
    SVRGConfig,
    box_projection,
    sgd_run,
    svrg_run,
)
from .probes import (
    MatrixOracle,
    MatvecCounter,
    ProbePlan,
    estimate_spectral_sum_unbiased,
    power_method_bound,
)
from .reference import exact_spectral_grad_lowrank, exact_spectral_sum

__all__ = [
    "RatingSet",
    "CompletionProblem",
    "CompletionResult",
    "GPProblem",
    "GPResult",
    "load_movielens",
    "ratings_from_files",
    "detect_ratings_format",
    "load_gp_data",
    "synthetic_completion_data",
    "synthetic_gp_data",
    "completion_objective",
    "completion_rmse",
    "completion_train",
    "gp_negloglik",
    "gp_exact_nll_grad_logspace",
    "gp_train",
    "make_degree_distribution",
]

RATING_BOX = (0.0, 5.0)


# ---------------------------------------------------------------------------
# data handling
# ---------------------------------------------------------------------------


@dataclass
class RatingSet:
    """Observed (user, item, rating) triples with a train/test mask."""

    d_users: int
    d_items: int
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    train_mask: np.ndarray

    def __post_init__(self):
        if np.any(self.users < 0) or np.any(self.users >= self.d_users):
            raise ParameterError("user index out of range")
        if np.any(self.items < 0) or np.any(self.items >= self.d_items):
            raise ParameterError("item index out of range")
        for mask in (self.train_mask, ~self.train_mask):
            pairs = set(zip(self.users[mask].tolist(), self.items[mask].tolist()))
            if len(pairs) != int(mask.sum()):
                raise ParameterError("duplicate (user, item) pair within a split")

    @property
    def n_train(self) -> int:
        return int(self.train_mask.sum())

    def split(self, train: bool):
        mask = self.train_mask if train else ~self.train_mask
        return self.users[mask], self.items[mask], self.ratings[mask]


def _split_mask(count: int, train_frac: float, seed: int) -> np.ndarray:
    order = np.arange(count)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    # Fisher-Yates, explicit for reproducibility of the split contract
    for i in range(count - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        order[i], order[j] = order[j], order[i]
    mask = np.zeros(count, dtype=bool)
    mask[order[: int(math.floor(train_frac * count))]] = True
    return mask


def _parse_triples(path: Path, fmt: str):
    users, items, ratings = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if fmt == "csv" and lineno == 1:
                continue
            parts = line.split("::") if fmt == "double_colon" else line.split(",")
            try:
                users.append(int(parts[0]))
                items.append(int(parts[1]))
                ratings.append(float(parts[2]))
            except (IndexError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: malformed rating line {line!r}") from exc
    if not users:
        raise ParseError(f"{path}: no rating triples found")
    return np.asarray(users), np.asarray(items), np.asarray(ratings, dtype=float)


def detect_ratings_format(path: str | Path) -> str:
    """double_colon when the first nonempty line contains '::', else csv."""
    with open(path) as fh:
        for line in fh:
            if line.strip():
                return "double_colon" if "::" in line else "csv"
    raise ParseError(f"{path}: empty ratings file")


def load_movielens(
    path: str | Path,
    fmt: str = "double_colon",
    train_frac: float = 0.9,
    seed: int = 0,
) -> RatingSet:
    """Parse ratings and split deterministically.

    ``double_colon`` reads user::item::rating::timestamp lines; ``csv``
    reads a header line followed by user,item,rating rows.  Ratings are
    clamped to [0.5, 5]; raw ids are remapped to contiguous indices in
    sorted order; the train split takes floor(train_frac * count) triples
    chosen by a seeded shuffle.
    """
    path = Path(path)
    if fmt not in ("double_colon", "csv"):
        raise ParameterError(f"unknown ratings format {fmt!r}")
    users, items, ratings = _parse_triples(path, fmt)
    ratings = np.clip(ratings, 0.5, 5.0)
    user_ids = np.unique(users)
    item_ids = np.unique(items)
    users = np.searchsorted(user_ids, users)
    items = np.searchsorted(item_ids, items)
    mask = _split_mask(users.size, train_frac, seed)
    return RatingSet(
        d_users=user_ids.size,
        d_items=item_ids.size,
        users=users,
        items=items,
        ratings=ratings,
        train_mask=mask,
    )


def ratings_from_files(
    train_path: str | Path,
    test_path: str | Path | None = None,
    train_frac: float = 0.9,
    seed: int = 0,
) -> RatingSet:
    """Build a RatingSet from data files, sniffing the format.

    With one file the split is internal; with an explicit test file both
    files share one contiguous index space and the mask follows the
    files.
    """
    fmt = detect_ratings_format(train_path)
    if test_path is None:
        return load_movielens(train_path, fmt=fmt, train_frac=train_frac, seed=seed)
    u1, i1, r1 = _parse_triples(Path(train_path), fmt)
    u2, i2, r2 = _parse_triples(Path(test_path), detect_ratings_format(test_path))
    users = np.concatenate([u1, u2])
    items = np.concatenate([i1, i2])
    ratings = np.clip(np.concatenate([r1, r2]), 0.5, 5.0)
    user_ids = np.unique(users)
    item_ids = np.unique(items)
    mask = np.zeros(users.size, dtype=bool)
    mask[: u1.size] = True
    return RatingSet(
        d_users=user_ids.size,
        d_items=item_ids.size,
        users=np.searchsorted(user_ids, users),
        items=np.searchsorted(item_ids, items),
        ratings=ratings,
        train_mask=mask,
    )


def load_gp_data(path: str | Path):
    """Read regression data: two-column x,y CSV, or a whitespace matrix
    whose last column is y (multi-dimensional inputs)."""
    path = Path(path)
    text = path.read_text()
    delimiter = "," if "," in text.splitlines()[0] else None
    try:
        data = np.loadtxt(str(path), delimiter=delimiter, ndmin=2)
    except Exception as exc:
        raise ParseError(f"cannot parse regression data {path}: {exc}") from exc
    if data.shape[1] < 2:
        raise ParseError(f"{path}: need at least an input column and an output column")
    return data[:, :-1], data[:, -1]


def synthetic_completion_data(
    d: int, r: int, rank: int, observed_frac: float, seed: int, train_frac: float = 0.9
) -> RatingSet:
    """Low-rank ground-truth ratings in [0, 5] with a random observation
    mask, packaged like a parsed ratings file."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(8,)))
    left = rng.uniform(0.0, 1.0, size=(d, rank))
    right = rng.uniform(0.0, 1.0, size=(rank, r))
    truth = left @ right
    truth = 0.5 + 4.5 * (truth - truth.min()) / (truth.max() - truth.min())
    all_pairs = np.array([(i, j) for i in range(d) for j in range(r)])
    keep = rng.random(all_pairs.shape[0]) < observed_frac
    pairs = all_pairs[keep]
    ratings = truth[pairs[:, 0], pairs[:, 1]]
    mask = _split_mask(pairs.shape[0], train_frac, seed)
    return RatingSet(
        d_users=d,
        d_items=r,
        users=pairs[:, 0],
        items=pairs[:, 1],
        ratings=ratings,
        train_mask=mask,
    )


def synthetic_gp_data(d: int, theta: Sequence[float], seed: int, input_dim: int = 1):
    """Inputs on [0, 4]^input_dim and outputs drawn from the zero-mean
    Gaussian process with the RBF kernel at ``theta``."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(9,)))
    x = np.sort(rng.uniform(0.0, 4.0, size=(d, input_dim)), axis=0)
    kernel = _rbf_kernel(x, np.asarray(theta, dtype=float))
    chol = np.linalg.cholesky(kernel)
    y = chol @ rng.standard_normal(d)
    return x, y


# ---------------------------------------------------------------------------
# degree distributions by CLI-style name
# ---------------------------------------------------------------------------


def make_degree_distribution(kind: str, mean_degree: int, rho: float | None = None,
                             neg_r: float = 5.0) -> DegreeDistribution:
    """Map a distribution name (opt, pois, neg, det) onto a constructor."""
    if kind == "opt":
        if rho is None:
            raise ParameterError("the optimal distribution needs the decay parameter rho")
        return optimal_distribution(rho, mean_degree)
    if kind == "pois":
        return poisson_distribution(mean_degree)
    if kind == "neg":
        return negbinomial_distribution(mean_degree, r=neg_r)
    if kind == "det":
        return deterministic_distribution(mean_degree)
    raise ParameterError(f"unknown degree distribution {kind!r}")


# ---------------------------------------------------------------------------
# matrix completion
# ---------------------------------------------------------------------------


@dataclass
class CompletionProblem:
    """Smoothed nuclear-norm completion of a [0, 5]-valued factor.

    The data term indexes the factor entrywise against the observed
    ratings, matching the task's literal formulation at desk scale where
    the factor doubles as the rating matrix.
    """

    theta: np.ndarray
    epsilon: float
    lam: float
    box: tuple[float, float] = RATING_BOX

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.ndim != 2:
            raise ParameterError("factor must be d x r")
        if not self.epsilon > 0 or not self.lam > 0:
            raise ParameterError("epsilon and lambda must be positive")


@dataclass
class CompletionResult:
    theta_raw: np.ndarray
    theta: np.ndarray  # after rank-truncated SVD
    records: list[IterationRecord]
    test_rmse: float
    initial_test_rmse: float
    matvecs: int
    matvec_log: list[int] = field(default_factory=list)  # counter after each record


def _data_fit(problem: CompletionProblem, ratings: RatingSet, theta: np.ndarray) -> float:
    users, items, vals = ratings.split(train=True)
    resid = theta[users, items] - vals
    return float(problem.lam * np.sum(resid * resid))


def completion_objective(
    problem: CompletionProblem, ratings: RatingSet, theta: np.ndarray | None = None
) -> float:
    """Exact objective: tr((theta theta^T + eps I)^(1/2)) plus the
    weighted data fit over the observed training entries."""
    theta = problem.theta if theta is None else np.asarray(theta, dtype=float)
    if theta.shape != (ratings.d_users, ratings.d_items):
        raise ParameterError(
            f"factor shape {theta.shape} does not match the rating matrix "
            f"({ratings.d_users}, {ratings.d_items})"
        )
    a_dense = theta @ theta.T + problem.epsilon * np.eye(theta.shape[0])
    spectral = exact_spectral_sum(a_dense, np.sqrt)
    return spectral + _data_fit(problem, ratings, theta)


def _completion_exact_grad(problem: CompletionProblem, theta: np.ndarray) -> np.ndarray:
    return exact_spectral_grad_lowrank(theta, problem.epsilon, lambda x: 0.5 / np.sqrt(x))


def _sampling_headroom(rho: float, mean_degree: int) -> int:
    """Series degree covering the optimal distribution's geometric tail
    down to ~1e-13 excess probability."""
    return mean_degree + 1 + int(math.ceil(math.log(1e13) / math.log(rho)))


def _completion_model(
    problem: CompletionProblem,
    dist_kind: str,
    neg_r: float,
    counter: MatvecCounter,
    refresh_every: int,
) -> SpectralModel:
    holder: dict = {"interval": None}

    def oracle_at(theta):
        return LowRankPSD(theta, problem.epsilon, holder["interval"], counter=counter)

    def refresh(theta, seed, mean_degree):
        probe_oracle = MatrixOracle(
            dim=theta.shape[0],
            matvec=LowRankPSD(theta, problem.epsilon, Interval(0.0, 1.0)).mv,
            eig_interval=Interval(0.0, 1.0),
        )
        upper = power_method_bound(probe_oracle, 50, seed)
        upper = max(upper, 2.0 * problem.epsilon)
        interval = Interval(problem.epsilon, upper)
        holder["interval"] = interval
        rho = rho_from_endpoint_singularity(interval)
        degree = min(max(_sampling_headroom(rho, mean_degree), 60), 1000)
        series = compute_coefficients(np.sqrt, interval, degree)
        dist = make_degree_distribution(dist_kind, mean_degree, rho=rho, neg_r=neg_r)
        return series, dist

    return SpectralModel(
        oracle_at,
        refresh,
        refresh_every=refresh_every,
        extend_series=lambda interval, degree: compute_coefficients(np.sqrt, interval, degree),
    )


def completion_train(
    problem: CompletionProblem,
    ratings: RatingSet,
    cfg: SGDConfig | SVRGConfig,
    optimizer: str = "sgd",
    dist_kind: str = "opt",
    neg_r: float = 5.0,
    refresh_every: int = 100,
    svd_rank: int = 10,
    callback: Callable[[IterationRecord], None] | None = None,
) -> CompletionResult:
    """Train the completion factor with SGD or SVRG.

    The spectral gradient uses the amortized low-rank estimator; the data
    term has the analytic gradient 2 lambda (theta_ij - R_ij) on observed
    entries; every step projects back into the rating box.  A rank-
    truncated SVD is applied once after training, before the test RMSE.
    """
    users, items, vals = ratings.split(train=True)
    counter = MatvecCounter()
    model = _completion_model(problem, dist_kind, neg_r, counter, refresh_every)

    def g_value(theta):
        return _data_fit(problem, ratings, theta)

    def g_grad(theta):
        grad = np.zeros_like(theta)
        np.add.at(grad, (users, items), 2.0 * problem.lam * (theta[users, items] - vals))
        return grad

    obj = Objective(
        spectral=model,
        g_value=g_value,
        g_grad=g_grad,
        projection=lambda th: box_projection(th, *problem.box),
    )
    records: list[IterationRecord] = []
    matvec_log: list[int] = []

    def sink(rec):
        matvec_log.append(counter.count)
        records.append(rec)
        if callback is not None:
            callback(rec)

    if optimizer == "sgd":
        trajectory = sgd_run(obj, problem.theta, cfg, callback=sink)
        theta_raw = trajectory[-1]
    elif optimizer == "svrg":
        anchors = svrg_run(
            obj,
            problem.theta,
            cfg,
            exact_grad=lambda th: _completion_exact_grad(problem, th),
            callback=sink,
        )
        theta_raw = anchors[-1]
    else:
        raise ParameterError(f"unknown optimizer {optimizer!r}")
    theta_final = _truncated_svd(theta_raw, svd_rank)
    return CompletionResult(
        theta_raw=theta_raw,
        theta=theta_final,
        records=records,
        test_rmse=completion_rmse(theta_final, ratings, train=False),
        initial_test_rmse=completion_rmse(problem.theta, ratings, train=False),
        matvecs=counter.count,
        matvec_log=matvec_log,
    )


def _truncated_svd(theta: np.ndarray, rank: int) -> np.ndarray:
    u_mat, sigma, vt_mat = np.linalg.svd(theta, full_matrices=False)
    keep = min(rank, sigma.size)
    return (u_mat[:, :keep] * sigma[:keep]) @ vt_mat[:keep]


def completion_rmse(theta: np.ndarray, ratings: RatingSet, train: bool = False) -> float:
    users, items, vals = ratings.split(train=train)
    if users.size == 0:
        return float("nan")
    resid = theta[users, items] - vals
    return float(np.sqrt(np.mean(resid * resid)))


# ---------------------------------------------------------------------------
# Gaussian process learning
# ---------------------------------------------------------------------------


def _sq_dists(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return np.sum(diff * diff, axis=-1)


def _rbf_kernel(x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    noise, scale, length = theta
    return scale**2 * np.exp(-_sq_dists(x) / (2.0 * length**2)) + noise**2 * np.eye(x.shape[0])


@dataclass
class GPProblem:
    """Zero-mean GP regression with a dense RBF kernel.

    theta = (noise, signal scale, lengthscale), all positive; the kernel
    is scale^2 exp(-||x_i - x_j||^2 / (2 length^2)) + noise^2 I.
    """

    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        if self.x.shape[0] < self.x.shape[1]:
            self.x = self.x.T
        self.y = np.asarray(self.y, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.shape != (3,) or np.any(self.theta <= 0):
            raise ParameterError("hyperparameters must be three positive reals")
        if self.x.shape[0] != self.y.size:
            raise ParameterError("input/output counts differ")
        if self.x.shape[0] > 512:
            raise ParameterError("dense desk scale capped at 512 points")

    @property
    def dim(self) -> int:
        return self.y.size

    def kernel(self, theta=None) -> np.ndarray:
        return _rbf_kernel(self.x, self.theta if theta is None else np.asarray(theta))


@dataclass
class GPResult:
    theta: np.ndarray
    records: list[IterationRecord]
    nll_curve: np.ndarray


def _cg_solve(a_mat: np.ndarray, rhs: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    solution, info = scipy.sparse.linalg.cg(
        a_mat, rhs, rtol=tol, atol=0.0, maxiter=10 * rhs.size
    )
    if info != 0:
        resid = float(np.linalg.norm(a_mat @ solution - rhs))
        raise ConvergenceError(
            f"conjugate gradient stopped after {10 * rhs.size} iterations, residual {resid:.3e}"
        )
    return solution


def gp_negloglik(
    gp: GPProblem,
    theta: np.ndarray | None = None,
    mode: str = "exact",
    seed: int = 0,
    m_probes: int = 1,
    mean_degree: int = 10,
) -> float:
    """Negative log marginal likelihood.

    Exact mode goes through a Cholesky factorization; estimation mode
    solves the data term by conjugate gradients and estimates the
    log-determinant with the unbiased randomized estimator.
    """
    theta = gp.theta if theta is None else np.asarray(theta, dtype=float)
    a_mat = gp.kernel(theta)
    d = gp.dim
    const = 0.5 * d * math.log(2.0 * math.pi)
    if mode == "exact":
        try:
            chol = np.linalg.cholesky(a_mat)
        except np.linalg.LinAlgError as exc:
            raise ParameterError(
                "kernel is not positive definite; increase the noise term theta_1"
            ) from exc
        alpha = np.linalg.solve(a_mat, gp.y)
        logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
        return 0.5 * float(gp.y @ alpha) + 0.5 * logdet + const
    if mode != "estimate":
        raise ParameterError(f"unknown mode {mode!r}")
    alpha = _cg_solve(a_mat, gp.y)
    lower = 0.999 * theta[0] ** 2
    oracle = MatrixOracle.from_dense(a_mat, Interval(lower, 1.0))
    upper = max(power_method_bound(oracle, 50, seed), 2.0 * lower)
    interval = Interval(lower, upper)
    oracle = MatrixOracle.from_dense(a_mat, interval)
    rho = rho_from_endpoint_singularity(interval)
    series = compute_coefficients(
        np.log, interval, min(max(_sampling_headroom(rho, mean_degree), 60), 1000)
    )
    dist = optimal_distribution(rho, mean_degree)
    logdet_est = estimate_spectral_sum_unbiased(
        oracle, series, dist, ProbePlan(seed, m_probes)
    )
    return 0.5 * float(gp.y @ alpha) + 0.5 * logdet_est + const


def _gp_partials_logspace(gp: GPProblem, theta: np.ndarray):
    """Dense dA/dphi_i for phi = log theta."""
    noise, scale, length = theta
    sq = _sq_dists(gp.x)
    k0 = np.exp(-sq / (2.0 * length**2))
    eye = np.eye(gp.dim)
    return [
        2.0 * noise**2 * eye,
        2.0 * scale**2 * k0,
        scale**2 * k0 * (sq / length**2),
    ]


def _gp_model(gp: GPProblem, counter: MatvecCounter, refresh_every: int) -> SpectralModel:
    holder: dict = {"interval": None}

    def oracle_at(phi):
        theta = np.exp(phi)
        a_mat = gp.kernel(theta)
        partials = _gp_partials_logspace(gp, theta)
        return ParamMatrixOracle(
            dim=gp.dim,
            param_dim=3,
            theta=np.asarray(phi, dtype=float),
            apply=lambda _phi, x: a_mat @ x,
            apply_partial=lambda i, _phi, x: partials[i] @ x,
            eig_interval=holder["interval"],
            counter=counter,
        )

    def refresh(phi, seed, mean_degree):
        theta = np.exp(phi)
        a_mat = gp.kernel(theta)
        # noise floor bounds the spectrum below; keep a stale-safe margin
        lower = 0.5 * theta[0] ** 2
        probe = MatrixOracle.from_dense(a_mat, Interval(lower, lower + 1.0))
        upper = max(power_method_bound(probe, 50, seed), 2.0 * lower)
        interval = Interval(lower, upper)
        holder["interval"] = interval
        rho = rho_from_endpoint_singularity(interval)
        degree = min(max(_sampling_headroom(rho, mean_degree), 60), 1000)
        series = compute_coefficients(lambda x: 0.5 * np.log(x), interval, degree)
        return series, optimal_distribution(rho, mean_degree)

    return SpectralModel(
        oracle_at,
        refresh,
        refresh_every=refresh_every,
        extend_series=lambda interval, degree: compute_coefficients(
            lambda x: 0.5 * np.log(x), interval, degree
        ),
    )


def gp_exact_nll_grad_logspace(gp: GPProblem, phi: np.ndarray) -> np.ndarray:
    """Reference gradient of the NLL in log-parameter space."""
    theta = np.exp(phi)
    a_mat = gp.kernel(theta)
    a_inv = np.linalg.inv(a_mat)
    alpha = a_inv @ gp.y
    partials = _gp_partials_logspace(gp, theta)
    return np.array(
        [
            -0.5 * float(alpha @ (p @ alpha)) + 0.5 * float(np.sum(a_inv * p))
            for p in partials
        ]
    )


def gp_train(
    gp: GPProblem,
    cfg: SGDConfig,
    refresh_every: int = 10,
    log_halfwidth: float = 3.0,
    callback: Callable[[IterationRecord], None] | None = None,
) -> GPResult:
    """Learn the hyperparameters by projected SGD in log-parameter space.

    The quadratic data-fit gradient comes from one conjugate-gradient
    solve per step; the log-determinant gradient from the unbiased
    estimator.  Positivity comes from the log parameterization; the
    feasible set is a box of half-width ``log_halfwidth`` around the
    starting point, which keeps the spectrum boundable between interval
    refreshes.
    """
    counter = MatvecCounter()
    model = _gp_model(gp, counter, refresh_every)
    d = gp.dim
    const = 0.5 * d * math.log(2.0 * math.pi)

    def g_value(phi):
        a_mat = gp.kernel(np.exp(phi))
        alpha = _cg_solve(a_mat, gp.y)
        return 0.5 * float(gp.y @ alpha) + const

    def g_grad(phi):
        theta = np.exp(phi)
        a_mat = gp.kernel(theta)
        alpha = _cg_solve(a_mat, gp.y)
        partials = _gp_partials_logspace(gp, theta)
        return np.array([-0.5 * float(alpha @ (p @ alpha)) for p in partials])

    phi0 = np.log(gp.theta)
    lo = phi0 - log_halfwidth
    hi = phi0 + log_halfwidth
    obj = Objective(
        spectral=model,
        g_value=g_value,
        g_grad=g_grad,
        projection=lambda phi: np.clip(phi, lo, hi),
    )
    records: list[IterationRecord] = []
    sink = callback if callback is not None else records.append
    trajectory = sgd_run(obj, phi0, cfg, callback=sink)
    nll_curve = np.array([gp_negloglik(gp, np.exp(phi)) for phi in trajectory])
    return GPResult(theta=np.exp(trajectory[-1]), records=records, nll_curve=nll_curve)
