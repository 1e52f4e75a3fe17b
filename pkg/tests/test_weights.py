import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from freundlich_wls.exceptions import InvalidInputError
from freundlich_wls.numerics import RandomStream
from freundlich_wls.weights import (
    ErrorInputs,
    ErrorModel,
    GammaRangeWarning,
    curvature_term,
    cv_of_x,
    gamma_delta,
    log_cv,
    sigma_eps,
    sigma_eps_effective,
    weight_surface,
    write_surface_csv,
)

LN10 = math.log(10)


class TestSigmaEps:
    def test_linear_isotherm(self):
        assert sigma_eps(0.5, 1.0, 0.0, 0.05, 3) == pytest.approx(0.05 / (0.5 * LN10 * math.sqrt(3)), rel=1e-14)
        assert sigma_eps(0.5, 1.0, 0.0, 0.05, 3) == pytest.approx(0.025074, abs=1e-6)

    @pytest.mark.parametrize("n", [0.2, 0.7, 1.0])
    def test_no_ce_error(self, n):
        assert sigma_eps(0.4, n, 0.01, 0.0, 3) == pytest.approx(0.010857, abs=1e-6)

    def test_equals_effective_variance(self):
        assert sigma_eps(0.5, 0.7, 0.01, 0.05, 3) == pytest.approx(sigma_eps_effective(0.5, 0.7, 0.01, 0.05, 3), rel=1e-12)

    def test_effective_full_decrease(self):
        assert sigma_eps_effective(1.0, 0.0, 0.01, 0.05, 1) == pytest.approx(0.01 / LN10, rel=1e-14)
        assert sigma_eps_effective(1.0, 0.0, 0.01, 0.05, 1) == pytest.approx(0.0043429, abs=1e-7)

    def test_small_grid_equivalence(self):
        d, n = np.meshgrid(np.arange(0.05, 0.951, 0.05), np.arange(0.1, 1.01, 0.1))
        a = sigma_eps(d, n, 0.01, 0.05, 3)
        b = sigma_eps_effective(d, n, 0.01, 0.05, 3)
        assert np.max(np.abs(a / b - 1)) < 1e-12

    @pytest.mark.parametrize("fn", [sigma_eps, sigma_eps_effective])
    @pytest.mark.parametrize("delta", [0.0, -0.1, 1.5])
    def test_bad_delta(self, fn, delta):
        with pytest.raises(InvalidInputError):
            fn(delta, 0.7, 0.01, 0.05, 3)

    def test_large_gamma_warns(self):
        with pytest.warns(GammaRangeWarning):
            sigma_eps(0.5, 0.7, 0.01, 0.2, 3)

    def test_monotonicity(self):
        ds = np.linspace(0.05, 1.0, 20)
        ns = np.linspace(0.1, 1.0, 10)
        gs = np.linspace(0.0, 0.1, 6)
        base = dict(delta=0.5, n=0.7, gamma_i=0.01, gamma_e=0.05, u=3)

        def along(name, values):
            kw = dict(base)
            kw[name] = values
            return np.asarray(sigma_eps(**kw))

        assert np.all(np.diff(along("delta", ds)) < 0)
        assert np.all(np.diff(along("n", ns)) > 0)
        assert np.all(np.diff(along("gamma_i", gs)) > 0)
        assert np.all(np.diff(along("gamma_e", gs)) > 0)
        assert np.all(np.diff(along("u", np.arange(1, 8))) <= 0)

    @given(st.floats(0.01, 1.0), st.floats(0.0, 1.0), st.floats(0, 0.1), st.floats(0, 0.1), st.integers(1, 10))
    def test_routes_agree(self, d, n, gi, ge, u):
        a = sigma_eps(d, n, gi, ge, u)
        b = sigma_eps_effective(d, n, gi, ge, u)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-300)


def test_residual_quotients_standard_normal():
    # log-residual of replicate-averaged points at the true line, divided by sigma_eps
    delta, n, gi, ge, u, r = 0.45, 0.6, 0.01, 0.05, 3, 1.0
    ce0 = 1.0
    ci0 = ce0 / (1 - delta)
    k_f = (ci0 - ce0) / r / ce0**n
    s = RandomStream(99, 0)
    reps = 100_000
    ci = ci0 * (1 + gi * s.standard_normal((reps, 1)))
    ce = ce0 * (1 + ge * s.standard_normal((reps, u)))
    eps = np.log10((ci - ce) / r).mean(axis=1) - math.log10(k_f) - n * np.log10(ce).mean(axis=1)
    q = eps / sigma_eps(delta, n, gi, ge, u)
    assert abs(q.std() - 1) < 0.02
    assert abs(q.mean()) < 0.05


class TestCurvature:
    @pytest.mark.parametrize("d, n, v", [(0.0, 0.3, 1.0), (0.6, 1.0, 1.0), (1.0, 0.0, 0.0)])
    def test_values(self, d, n, v):
        assert curvature_term(d, n) == pytest.approx(v)

    def test_range_and_monotone(self):
        d, n = np.meshgrid(np.linspace(0, 1, 51), np.linspace(0, 1, 51), indexing="ij")
        c = curvature_term(d, n)
        assert c.min() >= 0 and c.max() <= 1
        assert np.all(np.diff(c, axis=0) <= 1e-15)
        assert np.all(np.diff(c, axis=1) >= -1e-15)


class TestCvOfX:
    def test_full_decrease(self):
        assert cv_of_x(1.0, 0.01, 0.05) == pytest.approx(0.01)

    def test_half(self):
        assert cv_of_x(0.5, 0.0, 0.1) == pytest.approx(0.1)

    def test_monte_carlo(self):
        s = RandomStream(5, 0)
        m = 1_000_000
        ci = 1.0 * (1 + 0.01 * s.standard_normal(m))
        ce = 0.6 * (1 + 0.05 * s.standard_normal(m))
        x = ci - ce
        assert x.std() / x.mean() == pytest.approx(cv_of_x(0.4, 0.01, 0.05), rel=0.02)

    def test_bad_delta(self):
        with pytest.raises(InvalidInputError):
            cv_of_x(0.0, 0.01, 0.05)


class TestLogCv:
    def test_values(self):
        assert log_cv(0.05) == pytest.approx(0.0217147, abs=1e-7)
        assert log_cv(0) == 0

    def test_monte_carlo_at_limit(self):
        z = RandomStream(6, 0).standard_normal(1_000_000)
        assert np.log10(1 + 0.1 * z).std() == pytest.approx(log_cv(0.10), rel=0.02)

    def test_warns_above_limit(self):
        with pytest.warns(GammaRangeWarning):
            log_cv(0.2)


class TestGammaDelta:
    def test_worked_value(self):
        assert gamma_delta(0.5, 0.01, 0.05, 3) == pytest.approx(0.031, abs=0.0005)

    def test_vanishes_at_full_decrease(self):
        assert gamma_delta(1 - 1e-12, 0.01, 0.05, 3) < 1e-12

    def test_no_noise(self):
        assert gamma_delta(0.5, 0.0, 0.0, 7) == 0

    @pytest.mark.parametrize("d", [0.0, 1.0, 1.2])
    def test_domain(self, d):
        with pytest.raises(InvalidInputError):
            gamma_delta(d, 0.01, 0.05, 3)


class TestSurface:
    deltas = np.round(np.arange(0.05, 1.0001, 0.05), 12)
    ns = np.round(np.arange(0.1, 1.0001, 0.1), 12)

    def test_corner_row(self):
        rows = weight_surface([1.0], [1.0], 0.025, 0.05, 3)
        assert rows[0].curvature == 1.0

    def test_u5_vs_u3(self):
        r3 = weight_surface(self.deltas, self.ns, 0.025, 0.05, 3)
        r5 = weight_surface(self.deltas, self.ns, 0.025, 0.05, 5)
        ratios = np.array([b.sigma_ratio / a.sigma_ratio for a, b in zip(r3, r5)])
        # the smallest ratio, sqrt((0.25 + 1/5) / (0.25 + 1/3)) = 0.8783, prints as 0.88
        assert ratios.min() == pytest.approx(math.sqrt(0.45 / (0.25 + 1 / 3)), rel=1e-12)
        assert round(ratios.min(), 2) >= 0.88
        assert ratios.max() <= 1.0

    def test_gamma_i_zero_below(self):
        a = weight_surface(self.deltas, self.ns, 0.0, 0.05, 3)
        b = weight_surface(self.deltas, self.ns, 0.025, 0.05, 3)
        assert all(x.sigma_ratio <= y.sigma_ratio for x, y in zip(a, b))

    def test_csv(self, tmp_path):
        rows = weight_surface([0.5, 1.0], [0.3], 0.025, 0.05, 3)
        p = tmp_path / "s.csv"
        with open(p, "w") as fh:
            write_surface_csv(rows, fh)
        lines = p.read_text().splitlines()
        assert lines[0] == "delta,n,curvature,sigma_ratio"
        assert float(lines[1].split(",")[3]) == rows[0].sigma_ratio


class TestTypes:
    def test_error_inputs(self):
        inp = ErrorInputs(0.5, 0.7, 0.01, 0.05, 3)
        assert inp.sigma() == pytest.approx(inp.sigma_effective(), rel=1e-12)
        with pytest.raises(InvalidInputError):
            ErrorInputs(0.0, 0.7, 0.01, 0.05, 3)

    def test_error_model(self):
        m = ErrorModel.from_parameters([0.4, 0.6, 0.8], 0.7, 0.01, 0.05, 3)
        assert m.sigma.shape == (3,)
        assert np.allclose(m.weights, 1 / m.sigma**2)
        s = m.scaled(0.1)
        assert s.source == "relative-scaled"
        assert np.allclose(s.sigma, 0.1 * m.sigma)
        assert np.all(ErrorModel.unit(4).sigma == 1)
        with pytest.raises(InvalidInputError):
            ErrorModel(np.array([1.0, 0.0]), "unit")
