"""Truncation-degree distributions for randomized Chebyshev expansion.

The estimator truncates a Chebyshev series at a random degree n ~ {q_i}
and re-weights each coefficient by 1/(1 - sum_{i<j} q_i) so the result
stays unbiased.  This module provides the variance-optimal distribution
(a point mass at K plus a geometric tail of ratio 1/rho), the Poisson /
negative-binomial / deterministic baselines, exact inverse-CDF sampling,
coefficient re-weighting, the closed-form weighted variance, the relaxed
variance objective that the optimal distribution minimizes, and the
finite-horizon KKT solution used as a reference oracle for optimality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import IO

import numpy as np
from scipy import stats

from .chebyshev import ChebSeries
from .exceptions import (
    DegenerateDistributionError,
    EstimationError,
    InfiniteVarianceError,
    ParameterError,
)

__all__ = [
    "DistributionKind",
    "DegreeDistribution",
    "WeightedCoeffs",
    "optimal_distribution",
    "poisson_distribution",
    "negbinomial_distribution",
    "deterministic_distribution",
    "tabulated_distribution",
    "sample_degree",
    "weighted_coefficients",
    "chebyshev_weighted_variance",
    "relaxed_objective",
    "finite_kkt_solution",
    "write_pmf_csv",
]

# baselines are tabulated until at most this much mass is missing, then
# renormalized to exactly unit mass
_TABLE_MASS_TOL = 1e-13


class DistributionKind(Enum):
    OPTIMAL = "optimal"
    POISSON = "poisson"
    NEG_BINOMIAL = "negbinomial"
    DETERMINISTIC = "deterministic"
    TABULATED = "tabulated"


def _kahan_cumsum(values: np.ndarray) -> np.ndarray:
    """Running sums with compensated accumulation."""
    out = np.empty_like(values)
    total = 0.0
    comp = 0.0
    for i, v in enumerate(values):
        y = v - comp
        t = total + y
        comp = (t - total) - y
        total = t
        out[i] = total
    return out


@dataclass(frozen=True)
class DegreeDistribution:
    """Probability mass function over truncation degrees.

    ``pmf_prefix`` stores q_0..q_J explicitly; beyond the prefix the mass
    either continues geometrically with ``tail_ratio`` (q_{J+m} =
    q_J * tail_ratio**m) or is zero.  ``cumsum_prefix`` holds the
    compensated running sums of the prefix.
    """

    kind: DistributionKind
    params: dict = field(default_factory=dict)
    pmf_prefix: np.ndarray = field(default_factory=lambda: np.zeros(1))
    cumsum_prefix: np.ndarray = field(init=False)
    tail_ratio: float | None = None

    def __post_init__(self):
        q = np.asarray(self.pmf_prefix, dtype=float)
        if q.ndim != 1 or q.size == 0:
            raise ParameterError("pmf prefix must be a nonempty 1-d array")
        if np.any(q < -1e-15):
            raise ParameterError("pmf entries must be nonnegative")
        q = np.maximum(q, 0.0)
        object.__setattr__(self, "pmf_prefix", q)
        object.__setattr__(self, "cumsum_prefix", _kahan_cumsum(q))
        if self.tail_ratio is not None and not 0.0 < self.tail_ratio < 1.0:
            raise ParameterError(f"geometric tail ratio must be in (0, 1), got {self.tail_ratio}")
        if np.any(np.diff(self.cumsum_prefix) < -1e-15):
            raise ParameterError("cumulative sums must be monotone")
        mass = self.total_mass()
        if abs(mass - 1.0) > 1e-12:
            raise ParameterError(f"total mass must be 1 within 1e-12, got {mass!r}")

    # -- mass bookkeeping ------------------------------------------------

    def _tail_mass_beyond_prefix(self) -> float:
        if self.tail_ratio is None:
            return 0.0
        c = self.tail_ratio
        return self.pmf_prefix[-1] * c / (1.0 - c)

    def total_mass(self) -> float:
        return float(self.cumsum_prefix[-1] + self._tail_mass_beyond_prefix())

    def mean(self) -> float:
        j_end = self.pmf_prefix.size - 1
        prefix_mean = float(np.arange(j_end + 1) @ self.pmf_prefix)
        if self.tail_ratio is None:
            return prefix_mean
        c = self.tail_ratio
        head = self.pmf_prefix[-1]
        tail_mean = head * (j_end * c / (1.0 - c) + c / (1.0 - c) ** 2)
        return prefix_mean + tail_mean

    def pmf_array(self, upto: int) -> np.ndarray:
        """q_0..q_upto, extending beyond the prefix by the tail rule."""
        j_end = self.pmf_prefix.size - 1
        if upto <= j_end:
            return self.pmf_prefix[: upto + 1].copy()
        out = np.zeros(upto + 1)
        out[: j_end + 1] = self.pmf_prefix
        if self.tail_ratio is not None:
            m = np.arange(1, upto - j_end + 1, dtype=float)
            out[j_end + 1 :] = self.pmf_prefix[-1] * self.tail_ratio**m
        return out

    def cumulative_array(self, upto: int) -> np.ndarray:
        """Compensated running sums S_0..S_upto."""
        return _kahan_cumsum(self.pmf_array(upto))

    def survival_array(self, upto: int) -> np.ndarray:
        """1 - S_j for j = 0..upto, accumulated from the far tail.

        Summing small positives from the tail inward avoids the
        cancellation that 1 - S_j suffers once S_j saturates; the result
        stays accurate even when the survival is far below machine eps.
        """
        m = max(upto, self.pmf_prefix.size - 1)
        q = self.pmf_array(m)
        if self.tail_ratio is not None:
            rem = q[m] * self.tail_ratio / (1.0 - self.tail_ratio)
        else:
            rem = 0.0
        surv = np.empty(m + 1)
        total = rem
        comp = 0.0
        surv[m] = total
        for j in range(m, 0, -1):
            y = q[j] - comp
            t = total + y
            comp = (t - total) - y
            total = t
            surv[j - 1] = total
        return surv[: upto + 1]


@dataclass(frozen=True)
class WeightedCoeffs:
    """Re-weighted coefficients b_j / (1 - sum_{i<j} q_i) up to degree n."""

    bhat: np.ndarray
    degree: int


def optimal_distribution(rho: float, meanN: int) -> DegreeDistribution:
    """Variance-optimal degree distribution at expected degree ``meanN``.

    Zero mass below K = max(0, N - floor(rho/(rho-1))), an atom
    q_K = 1 - (N-K)(rho-1)/rho, then a geometric tail
    q_i = (N-K)(rho-1)^2 rho^(K-i-1).  The atom at K may be zero when
    rho/(rho-1) is integral.
    """
    if not rho > 1.0:
        raise ParameterError(f"rho must be > 1, got {rho}")
    if meanN < 1:
        raise ParameterError(f"mean degree must be >= 1, got {meanN}")
    n_mean = int(meanN)
    K = max(0, n_mean - math.floor(rho / (rho - 1.0) + 1e-9))
    c = float(n_mean - K)
    q_at_K = 1.0 - c * (rho - 1.0) / rho
    prefix_len = K + 64
    i = np.arange(K + 1, prefix_len + 1, dtype=float)
    prefix = np.zeros(prefix_len + 1)
    prefix[K] = max(q_at_K, 0.0)
    prefix[K + 1 :] = c * (rho - 1.0) ** 2 * rho ** (K - i - 1.0)
    return DegreeDistribution(
        kind=DistributionKind.OPTIMAL,
        params={"rho": float(rho), "N": float(n_mean), "K": float(K)},
        pmf_prefix=prefix,
        tail_ratio=1.0 / rho,
    )


def _tabulate(frozen_dist, mean: float, kind: DistributionKind, params: dict) -> DegreeDistribution:
    length = int(4 * mean + 64)
    while float(frozen_dist.sf(length)) > _TABLE_MASS_TOL:
        length *= 2
        if length > 10_000_000:
            raise ParameterError("baseline distribution tail does not close")
    q = frozen_dist.pmf(np.arange(length + 1))
    q = q / q.sum()
    return DegreeDistribution(kind=kind, params=params, pmf_prefix=q, tail_ratio=None)


def poisson_distribution(meanN: float) -> DegreeDistribution:
    """Poisson baseline, tabulated and renormalized to unit mass."""
    if not meanN > 0:
        raise ParameterError(f"mean degree must be positive, got {meanN}")
    return _tabulate(
        stats.poisson(mu=meanN), meanN, DistributionKind.POISSON, {"N": float(meanN)}
    )


def negbinomial_distribution(meanN: float, r: float = 5.0) -> DegreeDistribution:
    """Negative-binomial baseline with shape r and mean ``meanN``."""
    if not meanN > 0:
        raise ParameterError(f"mean degree must be positive, got {meanN}")
    if not r >= 1:
        raise ParameterError(f"shape parameter must be >= 1, got {r}")
    p = r / (r + meanN)
    return _tabulate(
        stats.nbinom(n=r, p=p),
        meanN,
        DistributionKind.NEG_BINOMIAL,
        {"N": float(meanN), "r": float(r)},
    )


def deterministic_distribution(n: int) -> DegreeDistribution:
    """Point mass at degree n (the biased fixed-truncation baseline)."""
    if n < 0:
        raise ParameterError(f"degree must be >= 0, got {n}")
    prefix = np.zeros(n + 1)
    prefix[n] = 1.0
    return DegreeDistribution(
        kind=DistributionKind.DETERMINISTIC, params={"n": float(n)}, pmf_prefix=prefix
    )


def tabulated_distribution(
    pmf, tail_ratio: float | None = None, params: dict | None = None
) -> DegreeDistribution:
    """Wrap an explicit pmf (with optional geometric tail) for tests and
    random-search oracles."""
    return DegreeDistribution(
        kind=DistributionKind.TABULATED,
        params=params or {},
        pmf_prefix=np.asarray(pmf, dtype=float),
        tail_ratio=tail_ratio,
    )


def sample_degree(dist: DegreeDistribution, rng: np.random.Generator) -> int:
    """Exact inverse-CDF draw of a truncation degree.

    Consumes a single uniform variate; the geometric tail of the optimal
    distribution is inverted in closed form, so arbitrarily large degrees
    are reachable without tabulating them.  Zero-mass atoms are never
    returned.
    """
    if dist.kind is DistributionKind.DETERMINISTIC:
        return int(dist.params["n"])
    u = rng.random()
    cums = dist.cumsum_prefix
    if u < cums[-1]:
        return int(np.searchsorted(cums, u, side="right"))
    if dist.tail_ratio is None:
        return int(cums.size - 1)  # u landed in the renormalization slack
    # invert the geometric tail: conditional on exceeding the prefix end J,
    # the degree is J + 1 + G with P(G = g) = (1-c) c^g
    c = dist.tail_ratio
    tail_mass = dist._tail_mass_beyond_prefix()
    u_tail = min((u - cums[-1]) / tail_mass, 1.0 - 1e-16)
    g = int(math.floor(math.log1p(-u_tail) / math.log(c)))
    return dist.pmf_prefix.size + g


def weighted_coefficients(series: ChebSeries, dist: DegreeDistribution, n: int) -> WeightedCoeffs:
    """Coefficients re-weighted for the degree-n randomized truncation.

    Denominators are the compensated cumulative sums, so below the
    optimal distribution's support the weights are exactly 1 and
    bhat_j == b_j bit for bit.
    """
    if n < 0 or n > series.degree:
        raise ParameterError(f"degree {n} outside stored series degree {series.degree}")
    denom = np.ones(n + 1)
    if n >= 1:
        denom[1:] = 1.0 - dist.cumulative_array(n - 1)
    if np.any(denom < 1e-14):
        j_bad = int(np.nonzero(denom < 1e-14)[0][0])
        raise DegenerateDistributionError(
            f"re-weighting denominator 1 - S_{j_bad - 1} = {denom[j_bad]!r} underflows"
        )
    return WeightedCoeffs(bhat=series.coeffs[: n + 1] / denom, degree=n)


def _variance_terms(series: ChebSeries, dist: DegreeDistribution, tail_terms: int):
    """Shared guts: (j, b_j^2, survival_{j-1}) for j = 1..limit."""
    if tail_terms < series.degree:
        raise ParameterError(
            f"tail_terms = {tail_terms} must cover the stored series degree {series.degree}"
        )
    limit = min(tail_terms, series.degree)
    b = series.coeffs[1 : limit + 1]
    surv = dist.survival_array(limit - 1) if limit >= 1 else np.empty(0)
    return b, surv


def chebyshev_weighted_variance(
    series: ChebSeries, dist: DegreeDistribution, tail_terms: int
) -> float:
    """Closed-form variance of the randomized expansion in the Chebyshev
    weighted norm: (pi/2) * sum_j b_j^2 S_{j-1} / (1 - S_{j-1}).

    Raises when mass is exhausted below a degree whose coefficient is
    materially nonzero (the deterministic baseline on a non-polynomial).
    """
    b, surv = _variance_terms(series, dist, tail_terms)
    # coefficients at the quadrature noise floor carry no information and
    # must not be divided by genuinely tiny survivals
    scale = float(np.max(np.abs(series.coeffs)))
    negligible = np.abs(b) <= 1e-13 * scale
    exhausted = surv == 0.0
    if np.any(exhausted & ~negligible):
        j_bad = int(np.nonzero(exhausted & ~negligible)[0][0]) + 1
        raise InfiniteVarianceError(
            f"all degree mass lies below j = {j_bad} but b_{j_bad} != 0; variance diverges"
        )
    keep = ~exhausted & ~negligible
    ratio = (1.0 - surv[keep]) / surv[keep]
    return float(0.5 * np.pi * np.sum(b[keep] ** 2 * ratio))


def relaxed_objective(dist: DegreeDistribution, rho: float, terms: int) -> float:
    """The decay-weighted surrogate sum_j rho^(-2j) S_{j-1}/(1 - S_{j-1})
    that the optimal distribution minimizes at fixed mean degree."""
    if terms < 1:
        raise ParameterError(f"terms must be >= 1, got {terms}")
    if not rho > 1.0:
        raise ParameterError(f"rho must be > 1, got {rho}")
    surv = dist.survival_array(terms - 1)
    if np.any(surv == 0.0):
        j_bad = int(np.nonzero(surv == 0.0)[0][0]) + 1
        raise InfiniteVarianceError(
            f"all degree mass lies below j = {j_bad}; relaxed objective diverges"
        )
    j = np.arange(1, terms + 1, dtype=float)
    return float(np.sum(rho ** (-2.0 * j) * (1.0 - surv) / surv))


def finite_kkt_solution(rho: float, meanN: int, T: int) -> DegreeDistribution:
    """Optimal distribution of the horizon-T relaxed problem.

    Closed-form KKT point: zero mass through k, an atom at k+1, a
    geometric run through T-1 and a closing atom at T.  The support
    offset k is the nominal N - 1 - floor(rho/(rho-1)) or its feasible
    neighbor when the strict KKT interval excludes the nominal choice.
    Raises when no offset satisfies both feasibility conditions (T too
    small).
    """
    if not rho > 1.0:
        raise ParameterError(f"rho must be > 1, got {rho}")
    if meanN < 1:
        raise ParameterError(f"mean degree must be >= 1, got {meanN}")
    N = int(meanN)
    nominal = N - 1 - math.floor(rho / (rho - 1.0) + 1e-9)
    candidates = [nominal, nominal + 1, nominal - 1]
    candidates += [k for k in range(-1, N - 1) if k not in candidates]
    chosen = None
    for k in candidates:
        if k < -1 or k > N - 2 or T < k + 2:
            continue
        damp = 1.0 - rho ** (-(T - k - 1.0))
        lo = damp / (rho - 1.0)
        hi = rho * damp / (rho - 1.0)
        if lo < N - k - 1 <= hi:
            chosen = k
            break
    if chosen is None:
        raise EstimationError(
            f"no support offset k puts N-k-1 inside the KKT feasibility interval "
            f"((1-rho^(k+1-T))/(rho-1), rho*(1-rho^(k+1-T))/(rho-1)] for rho={rho}, "
            f"N={N}, T={T}; increase T"
        )
    k = chosen
    damp = 1.0 - rho ** (-(T - k - 1.0))
    c = float(N - k - 1)
    q = np.zeros(T + 1)
    q[k + 1] = 1.0 - c * (rho - 1.0) / (rho * damp)
    n_run = np.arange(k + 2, T, dtype=float)
    q[k + 2 : T] = c * (rho - 1.0) ** 2 * rho ** (k - n_run) / damp
    q[T] = c * (rho - 1.0) / (rho ** (T - k - 1.0) - 1.0)
    objective = (1.0 - rho ** (-2.0 * (k + 1))) / (rho**2 - 1.0) + damp**2 / (
        c * (rho - 1.0) ** 2 * rho ** (2.0 * (k + 1))
    )
    return DegreeDistribution(
        kind=DistributionKind.TABULATED,
        params={
            "rho": float(rho),
            "N": float(N),
            "T": float(T),
            "k": float(k),
            "kkt_objective": objective,
        },
        pmf_prefix=q,
        tail_ratio=None,
    )


def write_pmf_csv(dist: DegreeDistribution, fh: IO[str], count: int) -> None:
    """Emit rows (i, q_i, cumsum) for i = 0..count."""
    q = dist.pmf_array(count)
    cums = dist.cumulative_array(count)
    fh.write("i,q_i,cumsum\n")
    for i in range(count + 1):
        fh.write(f"{i},{float(q[i])!r},{float(cums[i])!r}\n")
