"""Tests for truncation-degree distributions and their variance algebra."""

import io
import math

import numpy as np
import pytest
from helpers import (
    conditional_weighted_variance,
    observable_horizon,
    random_feasible_pmf,
    weighted_norm_sq,
)

from spectral_cheb.chebyshev import ChebSeries, Interval, compute_coefficients
from spectral_cheb.degree_dist import (
    DistributionKind,
    chebyshev_weighted_variance,
    deterministic_distribution,
    finite_kkt_solution,
    negbinomial_distribution,
    optimal_distribution,
    poisson_distribution,
    relaxed_objective,
    sample_degree,
    tabulated_distribution,
    weighted_coefficients,
    write_pmf_csv,
)
from spectral_cheb.exceptions import (
    EstimationError,
    InfiniteVarianceError,
    ParameterError,
)

IV = Interval(0.05, 0.95)
RHO_LOG = 1.595433215948964  # ellipse parameter of the singularity at 0 for [0.05, 0.95]


def all_distributions(mean_n):
    return {
        "opt": optimal_distribution(2.0, mean_n),
        "pois": poisson_distribution(mean_n),
        "neg": negbinomial_distribution(mean_n, r=5),
    }


class TestOptimalDistribution:
    def test_rho2_mean1(self):
        dist = optimal_distribution(2.0, 1)
        assert dist.params["K"] == 0
        q = dist.pmf_array(4)
        np.testing.assert_allclose(q, [0.5, 0.25, 0.125, 0.0625, 0.03125], rtol=1e-13)
        assert dist.total_mass() == pytest.approx(1.0, abs=1e-13)
        assert dist.mean() == pytest.approx(1.0, abs=1e-10)

    def test_rho3_mean2(self):
        dist = optimal_distribution(3.0, 2)
        assert dist.params["K"] == 1
        q = dist.pmf_array(3)
        np.testing.assert_allclose(q, [0.0, 1 / 3, 4 / 9, 4 / 27], rtol=1e-13)
        assert dist.mean() == pytest.approx(2.0, abs=1e-10)

    def test_rho2_mean5_zero_atom(self):
        # rho/(rho-1) integral makes the atom at K vanish
        dist = optimal_distribution(2.0, 5)
        assert dist.params["K"] == 3
        q = dist.pmf_array(5)
        np.testing.assert_allclose(q[:3], 0.0, atol=0)
        assert q[3] == pytest.approx(0.0, abs=1e-15)
        np.testing.assert_allclose(q[4:], [0.5, 0.25], rtol=1e-13)

    def test_invalid_rho(self):
        with pytest.raises(ParameterError):
            optimal_distribution(1.0, 5)

    @pytest.mark.parametrize("rho,mean_n", [(2.0, 1), (3.0, 2), (2.0, 5), (1.3, 7), (5.0, 20)])
    def test_constraints(self, rho, mean_n):
        dist = optimal_distribution(rho, mean_n)
        assert abs(dist.total_mass() - 1.0) <= 1e-12
        assert abs(dist.mean() - mean_n) <= 1e-9

    def test_unbiasedness_tail_condition(self):
        # survival decays at least geometrically: 1 - S_n <= C rho^-n
        dist = optimal_distribution(1.7, 12)
        rho, K, n_mean = 1.7, dist.params["K"], 12
        c_const = (n_mean - K) * (rho - 1.0) * rho ** (K - 1.0)
        surv = dist.survival_array(200)
        n = np.arange(201, dtype=float)
        assert np.all(surv <= c_const * rho**(-n) * (1 + 1e-9) + 1e-300)

    def test_survival_matches_closed_form(self):
        # accumulated sums and the analytic tail law agree
        dist = optimal_distribution(2.5, 8)
        rho, K, n_mean = 2.5, int(dist.params["K"]), 8
        surv = dist.survival_array(120)
        n = np.arange(K, 121, dtype=float)
        analytic = (n_mean - K) * (rho - 1.0) * rho ** (K - n - 1.0)
        np.testing.assert_allclose(surv[K:], analytic, rtol=1e-12, atol=1e-12)


class TestBaselines:
    def test_poisson_pmf_at_mean(self):
        # frozen from e^-10 10^10 / 10!
        dist = poisson_distribution(10)
        assert dist.pmf_array(10)[10] == pytest.approx(0.125110035721133, rel=1e-10)

    def test_poisson_small_mean(self):
        dist = poisson_distribution(0.5)
        assert dist.pmf_array(0)[0] == pytest.approx(math.exp(-0.5), rel=1e-12)

    @pytest.mark.parametrize("mean_n", [1, 5, 10, 50, 100])
    def test_mean_constraints(self, mean_n):
        assert abs(poisson_distribution(mean_n).mean() - mean_n) <= 1e-9
        for r in (1, 2, 5, 10):
            assert abs(negbinomial_distribution(mean_n, r).mean() - mean_n) <= 1e-9

    def test_deterministic(self):
        dist = deterministic_distribution(7)
        assert sample_degree(dist, np.random.default_rng(0)) == 7
        assert dist.mean() == 7.0


class TestSampling:
    def test_optimal_monte_carlo_matches_pmf(self):
        dist = optimal_distribution(2.0, 1)
        rng = np.random.default_rng(42)
        draws = np.array([sample_degree(dist, rng) for _ in range(10**6)])
        # mean 1, atom q_0 = 0.5; variance of the degree distribution:
        q = dist.pmf_array(400)
        i = np.arange(401, dtype=float)
        var = float(q @ (i - 1.0) ** 2) + dist._tail_mass_beyond_prefix() * 400**2
        se_mean = math.sqrt(var / draws.size)
        assert abs(draws.mean() - 1.0) < 3 * se_mean
        p0 = np.mean(draws == 0)
        se_p0 = math.sqrt(0.5 * 0.5 / draws.size)
        assert abs(p0 - 0.5) < 3 * se_p0

    def test_optimal_support_floor(self):
        dist = optimal_distribution(3.0, 2)
        rng = np.random.default_rng(7)
        draws = np.array([sample_degree(dist, rng) for _ in range(10**5)])
        assert draws.min() == 1  # == K

    def test_tabulated_sampling(self):
        dist = poisson_distribution(4)
        rng = np.random.default_rng(3)
        draws = np.array([sample_degree(dist, rng) for _ in range(10**5)])
        assert abs(draws.mean() - 4.0) < 3 * 2.0 / math.sqrt(draws.size)

    def test_deterministic_given_seed(self):
        dist = optimal_distribution(1.8, 6)
        a = [sample_degree(dist, np.random.default_rng(11)) for _ in range(50)]
        b = [sample_degree(dist, np.random.default_rng(11)) for _ in range(50)]
        assert a == b


class TestWeightedCoefficients:
    def test_deterministic_keeps_coefficients(self):
        series = compute_coefficients(np.exp, Interval(-1, 1), degree=10)
        dist = deterministic_distribution(10)
        wc = weighted_coefficients(series, dist, 10)
        assert np.array_equal(wc.bhat, series.coeffs)

    def test_optimal_rho2_mean1(self):
        series = compute_coefficients(np.exp, Interval(-1, 1), degree=10)
        dist = optimal_distribution(2.0, 1)
        wc = weighted_coefficients(series, dist, 4)
        assert wc.bhat[1] == pytest.approx(2.0 * series.coeffs[1], rel=1e-13)

    def test_optimal_rho3_mean2(self):
        series = compute_coefficients(np.exp, Interval(-1, 1), degree=10)
        dist = optimal_distribution(3.0, 2)
        wc = weighted_coefficients(series, dist, 5)
        assert wc.bhat[2] == pytest.approx(series.coeffs[2] * 1.5, rel=1e-13)

    def test_bit_exact_below_support(self):
        series = compute_coefficients(np.log, IV, degree=40)
        dist = optimal_distribution(1.6, 20)
        k_supp = int(dist.params["K"])
        wc = weighted_coefficients(series, dist, 30)
        assert np.array_equal(wc.bhat[: k_supp + 1], series.coeffs[: k_supp + 1])

    def test_degree_outside_series(self):
        series = compute_coefficients(np.exp, Interval(-1, 1), degree=5)
        with pytest.raises(ParameterError):
            weighted_coefficients(series, optimal_distribution(2.0, 2), 9)


class TestWeightedVariance:
    def test_polynomial_with_covering_deterministic_degree(self):
        series = compute_coefficients(lambda x: 4 * x**3 - x, Interval(-1, 1), degree=3)
        dist = deterministic_distribution(5)
        assert chebyshev_weighted_variance(series, dist, 400) == 0.0

    def test_two_atom_hand_value(self):
        series = ChebSeries(Interval(-1, 1), np.array([0.0, 1.0]))
        dist = tabulated_distribution([0.5, 0.5])
        assert chebyshev_weighted_variance(series, dist, 10) == pytest.approx(np.pi / 2)

    def test_two_atom_monte_carlo_oracle(self):
        # sample degrees, integrate the weighted error numerically, average
        series = ChebSeries(Interval(-1, 1), np.array([0.0, 1.0]))
        dist = tabulated_distribution([0.5, 0.5])
        rng = np.random.default_rng(5)
        vals = []
        for _ in range(4000):
            n = sample_degree(dist, rng)
            wc = weighted_coefficients(series, dist, n)
            vals.append(weighted_norm_sq(series, wc.bhat, lambda x: x))
        se = np.std(vals) / math.sqrt(len(vals))
        assert abs(np.mean(vals) - np.pi / 2) < max(3 * se, 1e-12)

    def test_deterministic_on_nonpolynomial_diverges(self):
        series = compute_coefficients(np.exp, Interval(-1, 1), degree=20)
        with pytest.raises(InfiniteVarianceError):
            chebyshev_weighted_variance(series, deterministic_distribution(5), 400)

    def test_figure_ordering_on_log(self):
        series = compute_coefficients(np.log, IV, degree=300)
        for mean_n in (5, 10, 20, 50):
            v_opt = chebyshev_weighted_variance(series, optimal_distribution(RHO_LOG, mean_n), 400)
            v_pois = chebyshev_weighted_variance(series, poisson_distribution(mean_n), 400)
            v_neg = chebyshev_weighted_variance(series, negbinomial_distribution(mean_n, 5), 400)
            assert v_opt < v_pois
            assert v_opt < v_neg

    @pytest.mark.parametrize("fname,f", [("log", np.log), ("sqrt", np.sqrt), ("exp", np.exp)])
    def test_closed_form_vs_monte_carlo(self, fname, f):
        # Both routes are conditioned on the degree range a 1e4-draw
        # budget can observe; beyond it the Poisson-weighted sum diverges
        # through events of probability < 1e-8.
        iv = Interval(-1, 1) if fname == "exp" else IV
        series = compute_coefficients(f, iv, degree=200)
        rho = 4.0 if fname == "exp" else RHO_LOG
        for dist in (
            optimal_distribution(rho, 8),
            poisson_distribution(8),
            negbinomial_distribution(8, 5),
        ):
            horizon = observable_horizon(dist)
            closed = conditional_weighted_variance(series, dist, horizon)
            rng = np.random.default_rng(17)
            degrees = np.array([sample_degree(dist, rng) for _ in range(10**4)])
            degrees = degrees[degrees <= horizon]
            per_degree = {}
            for n in np.unique(degrees):
                wc = weighted_coefficients(series, dist, int(n))
                per_degree[int(n)] = weighted_norm_sq(series, wc.bhat, f)
            vals = np.array([per_degree[int(n)] for n in degrees])
            se = vals.std() / math.sqrt(vals.size)
            assert abs(vals.mean() - closed) <= max(3 * se, 0.02 * closed)

    def test_tail_sum_matches_conditional_when_finite(self):
        # for geometric-tailed distributions the conditioned value and the
        # straight tail sum agree
        series = compute_coefficients(np.log, IV, degree=200)
        dist = optimal_distribution(RHO_LOG, 8)
        full = chebyshev_weighted_variance(series, dist, 300)
        conditioned = conditional_weighted_variance(series, dist, observable_horizon(dist))
        assert conditioned == pytest.approx(full, rel=1e-3)


class TestRelaxedObjective:
    def test_cauchy_schwarz_equality_case(self):
        # below the support threshold the optimum hits 1/(rho-1)^2 - 1/(rho^2-1)
        val = relaxed_objective(optimal_distribution(2.0, 1), 2.0, 400)
        assert val == pytest.approx(1.0 - 1.0 / 3.0, rel=1e-12)

    def test_deterministic_diverges(self):
        with pytest.raises(InfiniteVarianceError):
            relaxed_objective(deterministic_distribution(5), 2.0, 40)

    def test_optimal_beats_random_search(self):
        rng = np.random.default_rng(23)
        rho, mean_n = 2.0, 6
        v_opt = relaxed_objective(optimal_distribution(rho, mean_n), rho, 300)
        for _ in range(200):
            dist = random_feasible_pmf(rng, mean_n)
            assert v_opt <= relaxed_objective(dist, rho, 300) + 1e-10


class TestFiniteKKT:
    def test_hand_value_rho3_mean2(self):
        dist = finite_kkt_solution(3.0, 2, 8)
        q1 = dist.pmf_array(1)[1]
        assert q1 == pytest.approx(1.0 - (2.0 / 3.0) * (2187.0 / 2186.0), rel=1e-12)
        assert abs(dist.total_mass() - 1.0) <= 1e-12
        assert dist.mean() == pytest.approx(2.0, abs=1e-9)

    def test_kkt_residuals(self):
        # stationarity: rho^{-2(n+1)} / (1 - S_n)^2 constant on the support run
        rho, mean_n, horizon = 3.0, 2, 8
        dist = finite_kkt_solution(rho, mean_n, horizon)
        k = int(dist.params["k"])
        surv = dist.survival_array(horizon - 1)
        lam = rho ** (-2.0 * (np.arange(k + 1, horizon) + 1)) / surv[k + 1 : horizon] ** 2
        np.testing.assert_allclose(lam, lam[0], rtol=1e-10)

    def test_converges_to_infinite_optimum(self):
        for rho, mean_n in [(3.0, 2), (2.0, 5), (5.0, 10)]:
            fkkt = finite_kkt_solution(rho, mean_n, 64)
            opt = optimal_distribution(rho, mean_n)
            q_f = fkkt.pmf_array(63)
            q_o = opt.pmf_array(63)
            assert np.max(np.abs(q_f - q_o)) < 1e-12

    def test_objective_closed_form(self):
        rho, mean_n, horizon = 3.0, 2, 12
        dist = finite_kkt_solution(rho, mean_n, horizon)
        surv = dist.survival_array(horizon - 1)
        j = np.arange(1, horizon + 1, dtype=float)
        direct = float(np.sum(rho ** (-2.0 * j) / surv))
        assert direct == pytest.approx(dist.params["kkt_objective"], rel=1e-12)

    def test_infeasible_horizon_raises(self):
        with pytest.raises(EstimationError, match="interval"):
            finite_kkt_solution(1.01, 50, 8)


class TestCsvExport:
    def test_columns_and_determinism(self):
        dist = optimal_distribution(2.0, 3)
        buf1, buf2 = io.StringIO(), io.StringIO()
        write_pmf_csv(dist, buf1, 20)
        write_pmf_csv(dist, buf2, 20)
        assert buf1.getvalue() == buf2.getvalue()
        lines = buf1.getvalue().strip().split("\n")
        assert lines[0] == "i,q_i,cumsum"
        assert len(lines) == 22
        i, q, s = lines[5].split(",")
        assert int(i) == 4
        assert float(q) == dist.pmf_array(4)[4]


class TestKindLabels:
    def test_kinds(self):
        assert optimal_distribution(2.0, 2).kind is DistributionKind.OPTIMAL
        assert poisson_distribution(2).kind is DistributionKind.POISSON
        assert negbinomial_distribution(2, 2).kind is DistributionKind.NEG_BINOMIAL
        assert deterministic_distribution(2).kind is DistributionKind.DETERMINISTIC
