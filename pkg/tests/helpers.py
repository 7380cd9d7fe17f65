"""Shared test utilities: random feasible pmfs, dense matrix factories,
and the quadrature used by Monte-Carlo variance oracles."""

import numpy as np

from spectral_cheb.chebyshev import ChebSeries, eval_series
from spectral_cheb.degree_dist import DegreeDistribution, tabulated_distribution


def random_feasible_pmf(rng: np.random.Generator, mean_n: int) -> DegreeDistribution:
    """Random degree distribution with mean exactly ``mean_n``.

    A Dirichlet prefix plus a geometric tail, then a two-atom correction
    to pin total mass and mean; retries until the correction keeps every
    atom nonnegative.
    """
    for _ in range(200):
        j_end = int(mean_n + rng.integers(2, 2 * mean_n + 4))
        ratio = float(rng.uniform(0.2, 0.85))
        tail_mass = float(rng.uniform(0.05, 0.3))
        head = tail_mass * (1.0 - ratio)  # stored atom at index j_end + 1
        prefix = rng.dirichlet(np.full(j_end + 1, 0.8)) * (1.0 - tail_mass)
        q = np.concatenate([prefix, [head]])
        idx = np.arange(q.size, dtype=float)
        last = float(q.size - 1)
        mass = q.sum() + head * ratio / (1.0 - ratio)
        mean = idx @ q + head * (last * ratio / (1.0 - ratio) + ratio / (1.0 - ratio) ** 2)
        # restore both constraints exactly with atoms at 0 and j_end
        b = (mean_n - mean) / j_end
        a = (1.0 - mass) - b
        q[0] += a
        q[j_end] += b
        if q[0] >= 0 and q[j_end] >= 0:
            dist = tabulated_distribution(q, tail_ratio=ratio)
            if abs(dist.mean() - mean_n) < 1e-9:
                return dist
    raise AssertionError("could not build a random feasible pmf")


def random_spd(rng: np.random.Generator, dim: int, lo: float = 0.1, hi: float = 3.0) -> np.ndarray:
    """Dense SPD matrix with eigenvalues drawn uniformly in [lo, hi]."""
    w = rng.uniform(lo, hi, size=dim)
    basis, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    return (basis * w) @ basis.T


def random_symmetric(rng: np.random.Generator, dim: int, scale: float = 1.0) -> np.ndarray:
    m = rng.standard_normal((dim, dim)) * scale
    return 0.5 * (m + m.T)


def conditional_weighted_variance(series: ChebSeries, dist: DegreeDistribution,
                                  horizon: int) -> float:
    """E[ ||p_hat_n - f||_C^2 * 1{n <= horizon} ] from the per-degree
    closed form.

    Restricting to an observable degree horizon keeps the comparison
    meaningful for distributions whose survival decays faster than the
    squared coefficients (Poisson), where the unconditioned variance
    diverges in a tail no finite Monte-Carlo budget can reach.
    """
    b2 = series.coeffs**2
    q = dist.pmf_array(horizon)
    surv_incl = dist.survival_array(horizon)  # 1 - S_n
    ratio = np.zeros(horizon + 1)  # S_{j-1}/(1 - S_{j-1}) for j = 1..horizon
    ratio[1:] = (1.0 - surv_incl[:-1]) / surv_incl[:-1]
    total = 0.0
    for n in range(horizon + 1):
        tail = float(np.sum(b2[n + 1 :]))
        reweight = float(np.sum(b2[1 : n + 1] * ratio[1 : n + 1] ** 2))
        total += q[n] * 0.5 * np.pi * (tail + reweight)
    return total


def observable_horizon(dist: DegreeDistribution, floor: float = 1e-8) -> int:
    """Smallest degree whose survival drops below ``floor``."""
    surv = dist.survival_array(4096)
    return int(np.argmax(surv < floor))


def weighted_norm_sq(series: ChebSeries, coeffs, f, quad_points: int = 2048) -> float:
    """Gauss-Chebyshev quadrature of the squared weighted error
    || p - f ||_C^2 where p is the series evaluated with ``coeffs``."""
    iv = series.interval
    t = np.cos(np.pi * (np.arange(quad_points) + 0.5) / quad_points)
    x = iv.from_unit(t)
    p = eval_series(ChebSeries(iv, np.asarray(coeffs, dtype=float)), x)
    g = p - f(x)
    return float(np.pi / quad_points * np.sum(g * g))
