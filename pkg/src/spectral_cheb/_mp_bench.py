"""Extended-precision evaluation of the weighted-variance closed form.

The variance sweep runs the expected degree up to 100, where for the
benchmark functions the true variances sit orders of magnitude below
what double-precision coefficient computation can represent (the log
coefficients near degree 130 are ~1e-27 and their squares ~1e-53; for
exp the scales are hundreds of digits down).  The bench therefore
computes the Gauss-Chebyshev coefficient sums and the variance series
with mpmath at a per-function precision, and emits decimal strings that
preserve the tiny exponents.

Only the variance-bench command uses this module; the production
estimators stay in double precision.
"""

from __future__ import annotations

import math

import mpmath as mp

from .chebyshev import Interval
from .exceptions import ParameterError

__all__ = ["mp_variance_rows"]

SERIES_DEGREE = 220
QUAD_NODES = 2048
_DPS = {"log": 130, "sqrt": 130, "exp": 380, "poly": 130}


def _mp_function(fname, payload):
    if fname == "log":
        return mp.log
    if fname == "sqrt":
        return mp.sqrt
    if fname == "exp":
        return mp.exp
    if fname == "poly":
        coeffs = [mp.mpf(c) for c in payload]

        def poly(x):
            acc = mp.mpf(0)
            for c in reversed(coeffs):
                acc = acc * x + c
            return acc

        return poly
    raise ParameterError(f"unknown function {fname!r}")


def _mp_coefficients(fname, payload, interval: Interval, degree: int):
    """Chebyshev coefficients by the cosine-sum quadrature, evaluated with
    the first-kind recurrence per node (no per-term trig calls)."""
    a, b = mp.mpf(interval.a), mp.mpf(interval.b)
    f = _mp_function(fname, payload)
    half_width = (b - a) / 2
    center = (b + a) / 2
    sums = [mp.mpf(0) for _ in range(degree + 1)]
    for k in range(QUAD_NODES):
        theta = mp.pi * (2 * k + 1) / (2 * QUAD_NODES)
        t = mp.cos(theta)
        fx = f(half_width * t + center)
        t_prev = mp.mpf(1)
        t_cur = t
        sums[0] += fx
        if degree >= 1:
            sums[1] += fx * t
        for j in range(2, degree + 1):
            t_prev, t_cur = t_cur, 2 * t * t_cur - t_prev
            sums[j] += fx * t_cur
    coeffs = [s * 2 / QUAD_NODES for s in sums]
    coeffs[0] /= 2
    return coeffs


def _survival_optimal(rho_mp, mean_n: int, upto: int):
    """1 - S_j for the optimal distribution, exact in mp."""
    m = int(math.floor(float(rho_mp / (rho_mp - 1)) + 1e-9))
    k_supp = max(0, mean_n - m)
    c = mp.mpf(mean_n - k_supp)
    out = []
    for j in range(upto + 1):
        if j < k_supp:
            out.append(mp.mpf(1))
        else:
            out.append(c * (rho_mp - 1) * rho_mp ** (k_supp - j - 1))
    return out


def _survival_from_pmf(first, step, upto: int):
    """1 - S_j from a pmf given by its first value and the ratio
    recurrence q_{i+1} = step(i, q_i); summed forward in mp."""
    q = first
    cum = mp.mpf(0)
    out = []
    i = 0
    while i <= upto:
        cum += q
        out.append(1 - cum)
        q = step(i, q)
        i += 1
    return out


def _survival_poisson(mean_n: int, upto: int):
    first = mp.e ** (-mp.mpf(mean_n))
    return _survival_from_pmf(first, lambda i, q: q * mean_n / (i + 1), upto)


def _survival_negbinomial(mean_n: int, r: float, upto: int):
    r_mp = mp.mpf(r)
    p = r_mp / (r_mp + mean_n)
    first = p**r_mp
    return _survival_from_pmf(
        first, lambda i, q: q * (1 - p) * (i + r_mp) / (i + 1), upto
    )


def mp_variance_rows(
    fname: str,
    payload,
    interval: Interval,
    dist_specs: list[tuple[str, float]],
    sweep: list[int],
    rho: float | None,
) -> list[tuple[str, int, str]]:
    """(distribution label, N, decimal value or 'inf') rows of the sweep."""
    with mp.workdps(_DPS.get(fname, 130)):
        coeffs = _mp_coefficients(fname, payload, interval, SERIES_DEGREE)
        rho_mp = mp.mpf(rho) if rho is not None else None
        rows = []
        for kind, neg_r in dist_specs:
            label = f"neg({neg_r:g})" if kind == "neg" else kind
            for mean_n in sweep:
                if kind == "opt":
                    survival = _survival_optimal(rho_mp, mean_n, SERIES_DEGREE)
                elif kind == "pois":
                    survival = _survival_poisson(mean_n, SERIES_DEGREE)
                elif kind == "neg":
                    survival = _survival_negbinomial(mean_n, neg_r, SERIES_DEGREE)
                elif kind == "det":
                    survival = [mp.mpf(1) if j < mean_n else mp.mpf(0)
                                for j in range(SERIES_DEGREE + 1)]
                else:
                    raise ParameterError(f"unknown degree distribution {kind!r}")
                value = _variance_or_inf(coeffs, survival)
                rows.append((label, mean_n, value))
        return rows


def _variance_or_inf(coeffs, survival) -> str:
    # a zero-survival slot with a live coefficient above it means the
    # deterministic truncation of a non-polynomial: infinite variance
    scale = max(abs(c) for c in coeffs)
    noise = scale * mp.mpf(10) ** (-mp.mp.dps + 12)
    total = mp.mpf(0)
    for j in range(1, len(coeffs)):
        d = survival[j - 1]
        if d <= 0:
            if abs(coeffs[j]) > noise:
                return "inf"
            continue
        total += coeffs[j] ** 2 * (1 - d) / d
    total *= mp.pi / 2
    return mp.nstr(total, 17, min_fixed=1, max_fixed=0)
