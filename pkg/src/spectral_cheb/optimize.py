"""Projected SGD and SVRG over objectives tr f(A(theta)) + g(theta).

The spectral part of the gradient comes from the unbiased randomized
estimators; SVRG's control variate evaluates the estimator at the current
and the anchor parameters with identical probes and an identical drawn
degree, so the correction vanishes exactly when they coincide.  The
eigenvalue interval (and with it the series and degree distribution) is
refreshed on an epoch schedule, not per sample.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, IO, Sequence

import numpy as np

from .chebyshev import ChebSeries
from .degree_dist import DegreeDistribution, sample_degree
from .exceptions import NumericError, ParameterError
from .grad_est import (
    GradSample,
    LowRankPSD,
    ParamMatrixOracle,
    grad_estimate_generic,
    grad_estimate_lowrank,
)
from .probes import MatrixOracle, ProbePlan, degree_rng, estimate_spectral_sum_fixed

__all__ = [
    "SpectralModel",
    "Objective",
    "SGDConfig",
    "SVRGConfig",
    "IterationRecord",
    "sgd_run",
    "svrg_run",
    "box_projection",
    "write_trajectory_csv",
]


class SpectralModel:
    """Bundle of the parametric oracle and the (refreshable) expansion.

    ``oracle_at(theta)`` returns the operator at given parameters;
    ``refresh(theta, seed, mean_degree)`` rebuilds the series and the
    degree distribution, typically after re-bounding the spectrum with a
    power method.  ``refresh_every`` counts optimizer iterations between
    refreshes; 0 refreshes once at the start.
    """

    def __init__(
        self,
        oracle_at: Callable[[np.ndarray], ParamMatrixOracle | LowRankPSD],
        refresh: Callable[[np.ndarray, int, int], tuple[ChebSeries, DegreeDistribution]],
        refresh_every: int = 0,
        extend_series: Callable[..., ChebSeries] | None = None,
    ):
        self.oracle_at = oracle_at
        self.refresh = refresh
        self.refresh_every = refresh_every
        self.extend_series = extend_series
        self.series: ChebSeries | None = None
        self.dist: DegreeDistribution | None = None

    def ensure(self, theta: np.ndarray, iteration: int, seed: int, mean_degree: int) -> None:
        due = self.series is None or (
            self.refresh_every > 0 and iteration % self.refresh_every == 0
        )
        if due:
            self.series, self.dist = self.refresh(theta, seed, mean_degree)

    def grad_sample(self, theta: np.ndarray, seed: int, m_probes: int,
                    degree: int | None = None) -> GradSample:
        if degree is None:
            degree = sample_degree(self.dist, degree_rng(seed, 0))
        if degree > self.series.degree:
            # geometric tails occasionally out-draw the stored expansion
            if self.extend_series is None:
                raise ParameterError(
                    f"drawn degree {degree} exceeds the stored series degree "
                    f"{self.series.degree} and no extension rule is set"
                )
            self.series = self.extend_series(self.series.interval, degree)
        oracle = self.oracle_at(theta)
        plan = ProbePlan(seed, m_probes)
        if isinstance(oracle, LowRankPSD):
            return grad_estimate_lowrank(oracle, self.series, self.dist, plan, degree=degree)
        return grad_estimate_generic(oracle, self.series, self.dist, plan, degree=degree)

    def objective_estimate(self, theta: np.ndarray, eval_seed: int, m_probes: int,
                           degree: int) -> float:
        oracle = self.oracle_at(theta)
        plain = MatrixOracle(dim=oracle.dim, matvec=oracle.mv, eig_interval=oracle.eig_interval)
        n = min(degree, self.series.degree)
        return estimate_spectral_sum_fixed(plain, self.series, n, ProbePlan(eval_seed, m_probes))


def _zero_value(theta):
    return 0.0


def _zero_grad(theta):
    return np.zeros_like(theta)


def _identity(theta):
    return theta


@dataclass
class Objective:
    """min tr f(A(theta)) + g(theta) over the projection's fixed-point set."""

    spectral: SpectralModel | None = None
    g_value: Callable[[np.ndarray], float] = _zero_value
    g_grad: Callable[[np.ndarray], np.ndarray] = _zero_grad
    projection: Callable[[np.ndarray], np.ndarray] = _identity

    def validate(self, theta0: np.ndarray, h: float = 1e-6, tol: float = 1e-5) -> None:
        """Projection idempotence and g-gradient consistency at theta0."""
        projected = self.projection(np.asarray(theta0, dtype=float))
        if not np.array_equal(self.projection(projected), projected):
            raise ParameterError("projection is not idempotent")
        grad = np.asarray(self.g_grad(projected), dtype=float)
        flat = projected.reshape(-1)
        scale = max(1.0, float(np.abs(grad).max()))
        for i in range(flat.size):
            probe = projected.copy()
            probe.reshape(-1)[i] += h
            fd = (self.g_value(probe) - self.g_value(projected)) / h
            if abs(fd - grad.reshape(-1)[i]) > tol * scale:
                raise ParameterError(
                    f"g gradient coordinate {i} disagrees with finite differences"
                )


@dataclass
class SGDConfig:
    T: int
    M: int
    N: int
    master_seed: int
    step_rule: str = "exp_decay"  # or "inverse_alpha_t"
    alpha: float | None = None
    step0: float = 0.1
    decay: float = 0.97
    eval_seed: int | None = None
    log_objective: bool = True

    def __post_init__(self):
        if self.T < 1:
            raise ParameterError(f"need at least one iteration, got T = {self.T}")
        if self.step_rule not in ("exp_decay", "inverse_alpha_t"):
            raise ParameterError(f"unknown step rule {self.step_rule!r}")
        if self.step_rule == "inverse_alpha_t" and not (self.alpha and self.alpha > 0):
            raise ParameterError("inverse_alpha_t needs a positive strong-convexity alpha")
        if self.eval_seed is None:
            self.eval_seed = self.master_seed + 0x5EED


@dataclass
class SVRGConfig:
    S: int
    T: int
    eta: float
    M: int
    N: int
    master_seed: int
    eval_seed: int | None = None
    log_objective: bool = True

    def __post_init__(self):
        if self.S < 1 or self.T < 1:
            raise ParameterError("need at least one outer and one inner iteration")
        if not self.eta > 0:
            raise ParameterError(f"step size must be positive, got {self.eta}")
        if self.eval_seed is None:
            self.eval_seed = self.master_seed + 0x5EED


@dataclass
class IterationRecord:
    phase: str
    epoch: int
    iteration: int
    theta: np.ndarray
    degree: int
    objective_estimate: float
    grad_norm: float
    wallclock_ms: float


def _iteration_seeds(master_seed: int, count: int) -> np.ndarray:
    return np.random.SeedSequence(master_seed, spawn_key=(3,)).generate_state(count, np.uint64)


def _step_size(cfg: SGDConfig, t: int) -> float:
    if cfg.step_rule == "inverse_alpha_t":
        return 1.0 / (cfg.alpha * (t + 1))
    return cfg.step0 * cfg.decay**t


def box_projection(theta: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Elementwise clamp onto [lo, hi]; feasible entries pass unchanged."""
    if not lo < hi:
        raise ParameterError(f"box needs lo < hi, got [{lo}, {hi}]")
    return np.clip(theta, lo, hi)


def _estimate_objective(obj: Objective, cfg, theta: np.ndarray, degree: int) -> float:
    value = float(obj.g_value(theta))
    if obj.spectral is not None:
        value += obj.spectral.objective_estimate(theta, cfg.eval_seed, cfg.M, degree)
    return value


def sgd_run(
    obj: Objective,
    theta0: np.ndarray,
    cfg: SGDConfig,
    callback: Callable[[IterationRecord], None] | None = None,
) -> np.ndarray:
    """Projected SGD; returns the trajectory theta^(0..T).

    One gradient sample per iteration: a drawn degree shared across the
    parameter coordinates plus M Rademacher probes, then a projected
    step.  Deterministic given the config's master seed.
    """
    theta = np.asarray(theta0, dtype=float).copy()
    seeds = _iteration_seeds(cfg.master_seed, cfg.T)
    trajectory = np.empty((cfg.T + 1,) + theta.shape)
    trajectory[0] = theta
    start = time.perf_counter()
    for t in range(cfg.T):
        if obj.spectral is not None:
            obj.spectral.ensure(theta, t, int(seeds[t]), cfg.N)
            sample = obj.spectral.grad_sample(theta, int(seeds[t]), cfg.M)
            psi, degree = sample.value, sample.degree
        else:
            psi, degree = 0.0, -1
        direction = psi + obj.g_grad(theta)
        if not np.all(np.isfinite(direction)):
            raise NumericError(f"non-finite gradient at iteration {t}")
        theta = obj.projection(theta - _step_size(cfg, t) * direction)
        if not np.all(np.isfinite(theta)):
            raise NumericError(f"non-finite iterate at iteration {t}")
        trajectory[t + 1] = theta
        if callback is not None:
            objective = (
                _estimate_objective(obj, cfg, theta, cfg.N)
                if cfg.log_objective
                else float("nan")
            )
            callback(
                IterationRecord(
                    phase="sgd",
                    epoch=0,
                    iteration=t,
                    theta=theta.copy(),
                    degree=degree,
                    objective_estimate=objective,
                    grad_norm=float(np.linalg.norm(direction)),
                    wallclock_ms=(time.perf_counter() - start) * 1e3,
                )
            )
    return trajectory


def svrg_run(
    obj: Objective,
    theta0: np.ndarray,
    cfg: SVRGConfig,
    exact_grad: Callable[[np.ndarray], np.ndarray],
    callback: Callable[[IterationRecord], None] | None = None,
) -> np.ndarray:
    """Variance-reduced stochastic gradient descent.

    Each outer epoch anchors at theta_tilde with its exact spectral
    gradient; every inner step draws one probe set and one degree and
    evaluates the estimator at both the current iterate and the anchor
    with that identical randomness.  The epoch output is the average of
    the inner iterates.  Returns the anchors theta_tilde^(0..S).
    """
    theta_tilde = np.asarray(theta0, dtype=float).copy()
    anchors = np.empty((cfg.S + 1,) + theta_tilde.shape)
    anchors[0] = theta_tilde
    seeds = _iteration_seeds(cfg.master_seed, cfg.S * cfg.T)
    start = time.perf_counter()
    for s in range(1, cfg.S + 1):
        if obj.spectral is not None:
            obj.spectral.ensure(theta_tilde, 0, int(seeds[(s - 1) * cfg.T]), cfg.N)
        mu = np.asarray(exact_grad(theta_tilde), dtype=float)
        theta = theta_tilde.copy()
        inner_sum = np.zeros_like(theta)
        for t in range(cfg.T):
            seed = int(seeds[(s - 1) * cfg.T + t])
            if obj.spectral is not None:
                cur = obj.spectral.grad_sample(theta, seed, cfg.M)
                anchor = obj.spectral.grad_sample(
                    theta_tilde, seed, cfg.M, degree=cur.degree
                )
                correction = cur.value - anchor.value
                degree = cur.degree
            else:
                correction, degree = 0.0, -1
            direction = correction + mu + obj.g_grad(theta)
            if not np.all(np.isfinite(direction)):
                raise NumericError(f"non-finite gradient at epoch {s}, iteration {t}")
            theta = obj.projection(theta - cfg.eta * direction)
            inner_sum += theta
            if callback is not None:
                objective = (
                    _estimate_objective(obj, cfg, theta, cfg.N)
                    if cfg.log_objective
                    else float("nan")
                )
                callback(
                    IterationRecord(
                        phase="svrg",
                        epoch=s,
                        iteration=t,
                        theta=theta.copy(),
                        degree=degree,
                        objective_estimate=objective,
                        grad_norm=float(np.linalg.norm(direction)),
                        wallclock_ms=(time.perf_counter() - start) * 1e3,
                    )
                )
        theta_tilde = inner_sum / cfg.T
        anchors[s] = theta_tilde
    return anchors


def write_trajectory_csv(
    records: Sequence[IterationRecord], fh: IO[str], deterministic_timing: bool = True
) -> None:
    """Serialize iteration records.

    ``deterministic_timing`` zeroes the wallclock column so fixed-seed
    runs are byte-identical; measured timings stay available on the
    records themselves.
    """
    fh.write("phase,epoch,iter,objective_estimate,grad_norm,degree_n,wallclock_ms\n")
    for rec in records:
        wallclock = 0 if deterministic_timing else int(rec.wallclock_ms)
        fh.write(
            f"{rec.phase},{rec.epoch},{rec.iteration},{rec.objective_estimate!r},"
            f"{rec.grad_norm!r},{rec.degree},{wallclock}\n"
        )
