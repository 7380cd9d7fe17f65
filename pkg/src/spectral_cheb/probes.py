"""Matrix-side estimation: oracles, Rademacher probing, spectral-sum
estimators, and power-method eigenvalue bounding.

The estimators never materialize the shifted matrix; the interval map is
applied inside the matvec.  Every probe owns an rng stream derived from
(master_seed, probe index), so results do not depend on evaluation order,
and the probe loop parallelizes over fixed-size chunks capped by the
SPECTRAL_CHEB_THREADS environment variable with a deterministic ordered
reduction.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.io
import scipy.sparse

from .chebyshev import ChebSeries, Interval
from .degree_dist import DegreeDistribution, sample_degree, weighted_coefficients
from .exceptions import NumericError, ParameterError, ParseError

__all__ = [
    "MatvecCounter",
    "MatrixOracle",
    "ProbePlan",
    "probe_rng",
    "degree_rng",
    "rademacher_probe",
    "estimate_spectral_sum_fixed",
    "estimate_spectral_sum_unbiased",
    "sample_spectral_sums",
    "power_method_bound",
    "load_matrix",
]

_CHUNK = 32  # probes per work unit; fixed so thread count never changes results


class MatvecCounter:
    """Shared mutable tally of single matrix-vector products."""

    __slots__ = ("count",)

    def __init__(self):
        self.count = 0


@dataclass
class MatrixOracle:
    """Symmetric operator exposed through its matvec.

    ``matvec`` must accept a (d,) vector or a (d, m) block and return the
    same shape; ``eig_interval`` declares bounds containing every
    eigenvalue.
    """

    dim: int
    matvec: Callable[[np.ndarray], np.ndarray]
    eig_interval: Interval
    counter: MatvecCounter | None = None

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.counter is not None:
            self.counter.count += 1 if x.ndim == 1 else x.shape[1]
        return self.matvec(x)

    @classmethod
    def from_dense(cls, matrix: np.ndarray, eig_interval: Interval,
                   counter: MatvecCounter | None = None) -> "MatrixOracle":
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ParameterError(f"expected a square matrix, got {matrix.shape}")
        return cls(dim=matrix.shape[0], matvec=lambda x: matrix @ x,
                   eig_interval=eig_interval, counter=counter)


@dataclass
class ProbePlan:
    """Randomness of one estimator evaluation: the master seed, the probe
    count, and (once drawn) the truncation degree."""

    master_seed: int
    M: int
    degree_sample: int | None = None

    def __post_init__(self):
        if self.M < 1:
            raise ParameterError(f"need at least one probe, got M = {self.M}")


def probe_rng(master_seed: int, k: int, eval_index: int = 0) -> np.random.Generator:
    """Stream of probe k within evaluation ``eval_index``."""
    return np.random.default_rng(
        np.random.SeedSequence(master_seed, spawn_key=(eval_index, 0, k))
    )


def degree_rng(master_seed: int, eval_index: int = 0) -> np.random.Generator:
    """Stream that draws the truncation degree of one evaluation."""
    return np.random.default_rng(
        np.random.SeedSequence(master_seed, spawn_key=(eval_index, 1))
    )


def rademacher_probe(dim: int, seed) -> np.ndarray:
    """Vector of independent +-1 entries; ``seed`` is an int or Generator."""
    if dim < 1:
        raise ParameterError(f"dimension must be >= 1, got {dim}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.integers(0, 2, size=dim).astype(float) * 2.0 - 1.0


def _thread_count() -> int:
    raw = os.environ.get("SPECTRAL_CHEB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _apply_shifted(oracle: MatrixOracle, x: np.ndarray) -> np.ndarray:
    """Matvec of the interval-mapped operator (2A - (b+a)I)/(b-a)."""
    iv = oracle.eig_interval
    return (2.0 * oracle.apply(x) - (iv.b + iv.a) * x) / iv.width


def _bilinear_block(oracle: MatrixOracle, coeffs: np.ndarray, n: int,
                    probes: np.ndarray) -> np.ndarray:
    """Per-column sums sum_j c_j v_k^T w_j(k) via the shifted three-term
    recurrence; exactly n matvecs per column."""
    acc = coeffs[0] * np.einsum("dk,dk->k", probes, probes)
    if n == 0:
        return acc
    w_prev = probes
    w_cur = _apply_shifted(oracle, probes)
    acc = acc + coeffs[1] * np.einsum("dk,dk->k", probes, w_cur)
    for j in range(2, n + 1):
        w_prev, w_cur = w_cur, 2.0 * _apply_shifted(oracle, w_cur) - w_prev
        acc = acc + coeffs[j] * np.einsum("dk,dk->k", probes, w_cur)
    if not np.all(np.isfinite(acc)):
        raise NumericError(f"non-finite probe contribution at degree {n}")
    return acc


def _probe_contributions(oracle: MatrixOracle, coeffs: np.ndarray, n: int,
                         master_seed: int, m_probes: int, eval_index: int) -> np.ndarray:
    """Per-probe bilinear sums, chunked; chunk boundaries are fixed so the
    reduction order is independent of the worker count."""
    starts = range(0, m_probes, _CHUNK)

    def run_chunk(start: int) -> np.ndarray:
        stop = min(start + _CHUNK, m_probes)
        block = np.column_stack(
            [rademacher_probe(oracle.dim, probe_rng(master_seed, k, eval_index))
             for k in range(start, stop)]
        )
        return _bilinear_block(oracle, coeffs, n, block)

    workers = _thread_count()
    if workers > 1 and m_probes > _CHUNK:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, starts))
    else:
        parts = [run_chunk(s) for s in starts]
    return np.concatenate(parts)


def estimate_spectral_sum_fixed(
    A: MatrixOracle, series: ChebSeries, n: int, plan: ProbePlan
) -> float:
    """Fixed-degree estimate (1/M) sum_k v_k^T p_n(A) v_k.

    Biased unless f is a polynomial of degree <= n; the building block of
    the unbiased estimator below.
    """
    if series.interval != A.eig_interval:
        raise ParameterError(
            f"series interval {series.interval} does not match the oracle's "
            f"declared eigenvalue interval {A.eig_interval}"
        )
    if n < 0 or n > series.degree:
        raise ParameterError(f"degree {n} outside stored series degree {series.degree}")
    contrib = _probe_contributions(A, series.coeffs, n, plan.master_seed, plan.M, 0)
    return float(np.sum(contrib) / plan.M)


def estimate_spectral_sum_unbiased(
    A: MatrixOracle,
    series: ChebSeries,
    dist: DegreeDistribution,
    plan: ProbePlan,
    degree: int | None = None,
) -> float:
    """Single-sample unbiased estimate of tr f(A).

    Draws the truncation degree from ``dist`` (recorded on the plan),
    re-weights the coefficients, and averages the randomized bilinear
    forms over the plan's probes.  ``degree`` overrides the draw when the
    caller shares randomness across evaluations.
    """
    if series.interval != A.eig_interval:
        raise ParameterError(
            f"series interval {series.interval} does not match the oracle's "
            f"declared eigenvalue interval {A.eig_interval}"
        )
    n = sample_degree(dist, degree_rng(plan.master_seed, 0)) if degree is None else degree
    plan.degree_sample = n
    wc = weighted_coefficients(series, dist, n)
    contrib = _probe_contributions(A, wc.bhat, n, plan.master_seed, plan.M, 0)
    return float(np.sum(contrib) / plan.M)


def sample_spectral_sums(
    A: MatrixOracle,
    series: ChebSeries,
    dist: DegreeDistribution,
    master_seed: int,
    num_samples: int,
    M: int = 1,
) -> np.ndarray:
    """Independent unbiased estimates, vectorized for variance studies.

    Sample t reproduces exactly what ``estimate_spectral_sum_unbiased``
    would return for evaluation index t: the same per-sample degree
    stream and per-probe streams, grouped by drawn degree so the
    recurrences run on blocks.
    """
    if series.interval != A.eig_interval:
        raise ParameterError("series interval does not match the oracle's")
    degrees = np.array(
        [sample_degree(dist, degree_rng(master_seed, t)) for t in range(num_samples)]
    )
    out = np.empty(num_samples)
    block_samples = max(1, 512 // M)
    for n in np.unique(degrees):
        wc = weighted_coefficients(series, dist, int(n))
        idx = np.nonzero(degrees == n)[0]
        for start in range(0, idx.size, block_samples):
            chunk = idx[start : start + block_samples]
            probes = np.column_stack(
                [rademacher_probe(A.dim, probe_rng(master_seed, k, int(t)))
                 for t in chunk for k in range(M)]
            )
            sums = _bilinear_block(A, wc.bhat, int(n), probes)
            out[chunk] = sums.reshape(chunk.size, M).mean(axis=1)
    return out


def power_method_bound(A: MatrixOracle, iters: int, seed: int) -> float:
    """Upper eigenvalue bound: Rayleigh-quotient power iteration times a
    1.1 safety factor."""
    if iters < 1:
        raise ParameterError(f"need at least one iteration, got {iters}")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2,)))
    u = rng.standard_normal(A.dim)
    norm = np.linalg.norm(u)
    while norm == 0.0:  # probability zero; retry with the next stream
        u = rng.standard_normal(A.dim)
        norm = np.linalg.norm(u)
    u /= norm
    rayleigh = 0.0
    for _ in range(iters):
        v = A.apply(u)
        rayleigh = float(u @ v)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            return 0.0
        u = v / norm
    return 1.1 * rayleigh


def load_matrix(path: str | Path):
    """Read a symmetric matrix: MatrixMarket coordinate (*.mtx) or dense
    whitespace text.  Returns a dense ndarray or a scipy sparse matrix."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"matrix file not found: {path}")
    if path.suffix.lower() in (".mtx", ".mm"):
        try:
            matrix = scipy.io.mmread(str(path))
        except Exception as exc:
            raise ParseError(f"cannot parse MatrixMarket file {path}: {exc}") from exc
        matrix = scipy.sparse.csr_matrix(matrix)
        asym = abs(matrix - matrix.T)
        scale = max(1.0, float(abs(matrix).max()))
        if asym.nnz and asym.max() > 1e-12 * scale:
            raise ParseError(f"matrix in {path} is not symmetric")
        return matrix
    try:
        matrix = np.loadtxt(str(path), dtype=float, ndmin=2)
    except Exception as exc:
        raise ParseError(f"cannot parse dense matrix file {path}: {exc}") from exc
    if matrix.shape[0] != matrix.shape[1]:
        raise ParseError(f"matrix in {path} is not square: {matrix.shape}")
    if not np.allclose(matrix, matrix.T, atol=1e-12 * max(1.0, float(np.abs(matrix).max()))):
        raise ParseError(f"matrix in {path} is not symmetric")
    return matrix
