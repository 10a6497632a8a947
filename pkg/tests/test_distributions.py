import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from gsdkit.dataio import derive_stream
from gsdkit.distributions import (
    GsdParams,
    ProbitParams,
    default_map_grid,
    discretized_normal_pmf,
    gsd_moments,
    gsd_pmf,
    parameter_space_map,
    pmf_moments,
    rho_from_variance,
    sample,
    shifted_binomial_pmf,
    variance_bounds,
)

psi_st = st.floats(1.0, 5.0, allow_nan=False)
rho_st = st.floats(0.0, 1.0, allow_nan=False)


class TestVarianceBounds:
    @pytest.mark.parametrize(
        "psi, expected",
        [(3.0, (0.0, 4.0, 0.75)), (1.3, (0.21, 1.11, 0.925)), (1.0, (0.0, 0.0, 0.75)), (5.0, (0.0, 0.0, 0.75))],
    )
    def test_examples(self, psi, expected):
        b = variance_bounds(psi)
        assert (b.v_min, b.v_max, b.c_cutoff) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("psi", [0.99, 5.01, float("nan")])
    def test_domain(self, psi):
        with pytest.raises(ValueError):
            variance_bounds(psi)

    @given(psi_st)
    def test_invariants(self, psi):
        b = variance_bounds(psi)
        assert 0 <= b.v_min <= b.v_max
        assert (b.v_min == 0) == float(psi).is_integer()
        if b.v_max > b.v_min:
            assert 0 < b.c_cutoff <= 1


class TestGsdPmf:
    @pytest.mark.parametrize("psi", sorted(oracles.GOLDEN_PMFS))
    def test_reference_series(self, psi):
        for rho, expected in oracles.GOLDEN_PMFS[psi].items():
            np.testing.assert_allclose(gsd_pmf(psi, rho), expected, rtol=0, atol=1e-9)

    def test_params_object(self):
        np.testing.assert_array_equal(gsd_pmf(GsdParams(2.1, 0.88)), gsd_pmf(2.1, 0.88))

    def test_point_mass_and_two_point(self):
        np.testing.assert_allclose(gsd_pmf(3.0, 1.0), [0, 0, 1, 0, 0], atol=1e-15)
        np.testing.assert_allclose(gsd_pmf(3.0, 0.0), [0.5, 0, 0, 0, 0.5], atol=1e-15)

    def test_uniform_at_centre(self):
        # beta-binomial with alpha = beta = 1
        np.testing.assert_allclose(gsd_pmf(3.0, 0.5), [0.2] * 5, atol=1e-15)

    @pytest.mark.parametrize("psi", [1.0, 5.0])
    @pytest.mark.parametrize("rho", [0.0, 0.3, 1.0])
    def test_endpoints_are_point_masses(self, psi, rho):
        expected = np.zeros(5)
        expected[int(psi) - 1] = 1
        np.testing.assert_array_equal(gsd_pmf(psi, rho), expected)

    def test_matches_scipy_oracle(self):
        psi, rho = np.meshgrid(np.linspace(1.05, 4.95, 40), np.linspace(0.01, 1.0, 41), indexing="ij")
        ours = gsd_pmf(psi.ravel(), rho.ravel())
        ref = oracles.gsd_pmf(psi.ravel(), rho.ravel())
        np.testing.assert_allclose(ours, ref, atol=1e-12)

    def test_grid_sums_and_sign(self):
        psi, rho = np.meshgrid(np.arange(81) * 0.05 + 1, np.arange(21) * 0.05, indexing="ij")
        p = gsd_pmf(psi, rho)
        assert p.shape == (81, 21, 5)
        assert np.all(p >= 0)
        np.testing.assert_allclose(p.sum(axis=-1), 1.0, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("psi", np.round(np.arange(1.1, 4.95, 0.1), 1))
    def test_branch_continuity(self, psi):
        c = variance_bounds(psi).c_cutoff
        binom = shifted_binomial_pmf(psi)
        np.testing.assert_allclose(gsd_pmf(psi, c), binom, atol=1e-9)
        np.testing.assert_allclose(gsd_pmf(psi, c - 1e-9), gsd_pmf(psi, c), atol=1e-6)

    @given(st.floats(1.01, 4.99))
    def test_limits(self, psi):
        lo = np.zeros(5)
        lo[0], lo[4] = (5 - psi) / 4, (psi - 1) / 4
        np.testing.assert_allclose(gsd_pmf(psi, 0.0), lo, atol=1e-12)
        hi = np.zeros(5)
        f = math.floor(psi)
        hi[f - 1] += math.ceil(psi) - psi if math.ceil(psi) != f else 1.0
        if math.ceil(psi) != f:
            hi[f] += psi - f
        np.testing.assert_allclose(gsd_pmf(psi, 1.0), hi, atol=1e-12)

    @given(psi_st, rho_st)
    def test_valid_probability_vector(self, psi, rho):
        p = gsd_pmf(psi, rho)
        assert np.all(p >= 0)
        assert abs(p.sum() - 1) <= 1e-12

    def test_domain(self):
        with pytest.raises(ValueError):
            gsd_pmf(3.0, 1.2)
        with pytest.raises(ValueError):
            GsdParams(0.5, 0.5)


class TestMoments:
    def test_examples(self):
        assert gsd_moments(2.1, 0.61) == pytest.approx((2.1, 1.299), abs=1e-12)
        assert gsd_moments(3.0, 0.5) == pytest.approx((3.0, 2.0), abs=1e-12)
        assert gsd_moments(2.7, 1.0)[1] == pytest.approx(variance_bounds(2.7).v_min, abs=1e-12)

    def test_numeric_moments_on_grid(self):
        psi, rho = np.meshgrid(np.arange(81) * 0.05 + 1, np.arange(21) * 0.05, indexing="ij")
        mean, var = pmf_moments(gsd_pmf(psi, rho))
        m2, v2 = gsd_moments(psi, rho)
        np.testing.assert_allclose(mean, psi, atol=1e-9)
        np.testing.assert_allclose(var, v2, atol=1e-9)

    @pytest.mark.parametrize("psi, var, rho", [(3, 4, 0.0), (3, 0, 1.0), (3, 2, 0.5)])
    def test_rho_from_variance(self, psi, var, rho):
        assert rho_from_variance(psi, var) == pytest.approx(rho, abs=1e-15)

    @given(st.floats(1.001, 4.999), rho_st)
    def test_round_trip(self, psi, rho):
        _, var = gsd_moments(psi, rho)
        assert rho_from_variance(psi, var) == pytest.approx(rho, abs=1e-12)

    def test_rho_from_variance_errors(self):
        with pytest.raises(ValueError):
            rho_from_variance(3.0, 4.5)
        with pytest.raises(ValueError):
            rho_from_variance(1.0, 0.0)


class TestDiscretizedNormal:
    def test_central_mass(self):
        p = discretized_normal_pmf(3, 1)
        expected = oracles.discretized_normal(3, 1)
        np.testing.assert_allclose(p, expected, atol=1e-14)
        assert p[2] == pytest.approx(2 * float(oracles.normal_cdf(0.5)) - 1, abs=1e-14)
        assert p[1] == p[3] and p[0] == p[4]

    def test_left_censoring(self):
        np.testing.assert_allclose(discretized_normal_pmf(-10, 1), [1, 0, 0, 0, 0], atol=1e-15)

    @pytest.mark.parametrize("mu, sigma", [(2.4, 0.9), (4.9, 0.1), (7.0, 0.3), (1.2, 3.0)])
    def test_against_mpmath(self, mu, sigma):
        np.testing.assert_allclose(discretized_normal_pmf(mu, sigma), oracles.discretized_normal(mu, sigma),
                                   rtol=1e-9, atol=1e-15)

    @given(st.floats(0.01, 20))
    def test_palindromic_at_three(self, sigma):
        p = discretized_normal_pmf(3.0, sigma)
        np.testing.assert_allclose(p, p[::-1], atol=1e-14)

    @given(st.floats(-5, 10), st.floats(0.02, 10))
    def test_sums_to_one(self, mu, sigma):
        assert abs(discretized_normal_pmf(mu, sigma).sum() - 1) <= 1e-12

    @pytest.mark.parametrize("sigma", [0.0, -1.0])
    def test_domain(self, sigma):
        with pytest.raises(ValueError):
            discretized_normal_pmf(3.0, sigma)
        with pytest.raises(ValueError):
            ProbitParams(3.0, sigma)


class TestSample:
    def test_point_mass(self):
        out = sample([0, 0, 1, 0, 0], 24, derive_stream(1, "s", 0))
        np.testing.assert_array_equal(out, [0, 0, 24, 0, 0])

    def test_law_of_large_numbers(self):
        out = sample([0.2] * 5, 10**6, derive_stream(11, "lln", 0))
        assert out.sum() == 10**6
        assert np.all(np.abs(out / 10**6 - 0.2) < 0.002)

    def test_deterministic(self):
        p = gsd_pmf(2.1, 0.72)
        a = sample(p, 50, derive_stream(5, "x", 3))
        b = sample(p, 50, derive_stream(5, "x", 3))
        np.testing.assert_array_equal(a, b)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            sample([0.2] * 5, 0, derive_stream(1, "s", 0))


class TestParameterSpaceMap:
    def test_gsd_fixed_psi(self):
        rows = parameter_space_map("gsd", [2.1], np.arange(21) * 0.05)
        means = np.array([r[2] for r in rows])
        var = np.array([r[3] for r in rows])
        np.testing.assert_allclose(means, 2.1, atol=1e-12)
        # reference curve endpoints and first step: 3.19, 3.035, ..., 0.09
        assert var[0] == pytest.approx(3.19, abs=1e-9)
        assert var[1] == pytest.approx(3.035, abs=1e-9)
        assert var[-1] == pytest.approx(0.09, abs=1e-9)
        np.testing.assert_allclose(np.diff(var), -0.155, atol=1e-9)

    @pytest.mark.parametrize("psi, v0, v1, v_end", [(1.4, 1.44, 1.38, 0.24), (4.7, 1.11, 1.065, 0.21), (3.0, 4.0, 3.8, 0.0)])
    def test_gsd_reference_curves(self, psi, v0, v1, v_end):
        rows = parameter_space_map("gsd", [psi], [0.0, 0.05, 1.0])
        assert [r[3] for r in rows] == pytest.approx([v0, v1, v_end], abs=1e-9)

    def test_gsd_rho_one_is_lower_boundary(self):
        psi = np.linspace(1, 5, 81)
        rows = parameter_space_map("gsd", psi, [1.0])
        for (p, _, m, v) in rows:
            assert v == pytest.approx(variance_bounds(p).v_min, abs=1e-12)

    def test_probit_symmetric_mean(self):
        sig = np.linspace(0.1, 5, 50)
        rows = parameter_space_map("probit", [3.0], sig)
        np.testing.assert_allclose([r[2] for r in rows], 3.0, atol=1e-12)
        assert np.all(np.diff([r[3] for r in rows]) > 0)

    @pytest.mark.parametrize("model", ["gsd", "probit"])
    @pytest.mark.parametrize("sweep", ["param1", "param2"])
    def test_admissible_region(self, model, sweep):
        rows = parameter_space_map(model, *default_map_grid(model, sweep))
        for *_, m, v in rows:
            b = variance_bounds(min(max(m, 1.0), 5.0))
            assert b.v_min - 1e-9 <= v <= b.v_max + 1e-9

    def test_unknown_model(self):
        with pytest.raises(ValueError):
            parameter_space_map("li2020", [1], [1])
