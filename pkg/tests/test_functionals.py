import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate, special

from entropyflow import Flow, evolve
from entropyflow.density import GridDensity, dilate, from_family, parse_density, product, to_grid
from entropyflow.errors import (
    DimensionMismatch,
    GridTooCoarse,
    NonsmoothAtZeroTime,
    NotNormalized,
    StepTooLarge,
)
from entropyflow.functionals import (
    cross_term,
    entropy,
    entropy_power,
    fisher,
    gaussian_oracle,
    j_functional,
    k_functional,
    record,
)

from conftest import flow_for


def gauss_product(var: float, n: int):
    g = from_family(f"gaussian:sigma2={var}")
    return g if n == 1 else product(*[g] * n)


def laplace_oracle(t, lo=-40.0, hi=40.0, panels=500):
    """I and J of Laplace(1) + N(0, t) by Gauss-Legendre on the closed-form density."""
    s = math.sqrt(2 * t)
    c = math.exp(t / 2) / 4
    xg, wg = np.polynomial.legendre.leggauss(40)
    I = J = 0.0
    for a, b in zip(np.linspace(lo, hi, panels)[:-1], np.linspace(lo, hi, panels)[1:]):
        x = 0.5 * (b - a) * xg + 0.5 * (a + b)
        A = np.exp(-x) * special.erfc((t - x) / s)
        B = np.exp(x) * special.erfc((t + x) / s)
        G = np.exp(-t / 2 - x * x / (2 * t))
        f, f1, f2 = c * (A + B), c * (B - A), c * (A + B - 4 / (s * math.sqrt(math.pi)) * G)
        w = 0.5 * (b - a) * wg
        I += np.sum(w * f1 * f1 / f)
        J += np.sum(w * (f2 / f - (f1 / f) ** 2) ** 2 * f)
    return I, J


class TestGaussianClosedForms:
    @pytest.mark.parametrize("var", [0.25, 1.0, 4.0])
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_functionals(self, var, n):
        d = gauss_product(var, n)
        ref = gaussian_oracle(var, n)
        assert_allclose(entropy(d), ref.H, rtol=1e-10)
        assert_allclose(entropy_power(d), ref.N, rtol=1e-10)
        assert_allclose(fisher(d), ref.I, rtol=1e-10)
        assert_allclose(j_functional(d), ref.J, rtol=1e-9)

    def test_standard_entropy(self):
        assert abs(entropy(from_family("gaussian")) - 0.5 * math.log(2 * math.pi * math.e)) < 1e-9

    def test_product_of_standard(self):
        assert abs(entropy_power(product(from_family("gaussian"), from_family("gaussian"))) - 1) < 1e-9

    @pytest.mark.parametrize("var,t", [(1.0, 0.5), (0.5, 1.0), (2.0, 0.2)])
    def test_k_at_time(self, var, t):
        est = k_functional(from_family(f"gaussian:sigma2={var}"), t)
        assert abs(est.value / (2 / (var + t) ** 3) - 1) < 1e-4

    def test_k_error_estimate_order(self):
        # large steps keep the estimate above the roundoff floor
        fl = Flow(from_family("gaussian:sigma2=1"))
        e1 = k_functional(fl, 1.0, 0.2).err_est
        e2 = k_functional(fl, 1.0, 0.1).err_est
        assert e1 / e2 >= 8

    def test_record_follows_oracle(self):
        r = record(from_family("gaussian:sigma2=1"), 0.7)
        ref = gaussian_oracle(1.7)
        for name in ("H", "N", "I", "I_tilde", "J", "K"):
            assert abs(getattr(r, name) / getattr(ref, name) - 1) < 1e-6, name


class TestOracleValues:
    def test_sigma_one(self):
        r = gaussian_oracle(1.0)
        assert (r.N, r.I, r.J, r.K) == (1.0, 1.0, 1.0, 2.0)
        assert r.I_tilde == r.N == math.sqrt(r.n / r.J) == 1.0

    def test_sigma_two_n_three(self):
        r = gaussian_oracle(2.0, 3)
        assert (r.N, r.I, r.J, r.K) == (2.0, 1.5, 0.75, 0.75)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            gaussian_oracle(0.0)


class TestLogistic:
    d = from_family("logistic:scale=1")

    def _pdf(self, x):
        return math.exp(self.d.logpdf(np.array([x]))[0])

    def test_entropy_by_quadrature(self):
        ref, _ = integrate.quad(lambda x: -self._pdf(x) * math.log(self._pdf(x)), -60, 60, epsabs=1e-14, limit=200)
        assert abs(entropy(self.d) - ref) < 1e-8
        assert abs(ref - 2.0) < 1e-10

    def test_fisher_by_quadrature(self):
        def integrand(x):
            f = self._pdf(x)
            return self.d.dlogpdf(np.array([x]))[0] ** 2 * f

        ref, _ = integrate.quad(integrand, -60, 60, epsabs=1e-14, limit=200)
        assert abs(fisher(self.d) / ref - 1) < 1e-6
        assert abs(ref - 1 / 3) < 1e-10

    def test_j_closed_form(self):
        # (log f)'' = -2 f for the standard logistic, so J = 4 B(3, 3)
        assert abs(j_functional(self.d) / (4 * special.beta(3, 3)) - 1) < 1e-8


class TestEntropyMisc:
    def test_uniform(self):
        g = GridDensity(0.0, 1.0, 1025, np.zeros(1025))
        assert abs(entropy(g)) < 1e-14

    def test_power_definition(self):
        d = from_family("gumbel")
        assert abs(entropy_power(d) / (math.exp(2 * entropy(d)) / (2 * math.pi * math.e)) - 1) < 1e-12


def test_laplace_against_quadrature_oracle():
    """Evolved Laplace at t = 0.05: I and J from the closed-form smoothed density."""
    I_ref, J_ref = laplace_oracle(0.05)
    g = evolve(from_family("laplace:scale=1"), 0.05)
    assert abs(fisher(g) / I_ref - 1) < 1e-6
    assert abs(j_functional(g) / J_ref - 1) < 1e-4


@settings(max_examples=12, deadline=None)
@given(st.sampled_from(["logistic", "gumbel", "gaussian:sigma2=2", "logistic:scale=0.5"]), st.floats(0.3, 3.0))
def test_scaling_laws(spec, a):
    d = from_family(spec)
    da = dilate(d, a)
    assert abs(entropy(da) - entropy(d) - math.log(a)) < 1e-6 * abs(entropy(d) + math.log(a)) + 1e-10
    assert abs(entropy_power(da) / (a * a * entropy_power(d)) - 1) < 1e-6
    assert abs(fisher(da) * a * a / fisher(d) - 1) < 1e-6
    assert abs(j_functional(da) * a**4 / j_functional(d) - 1) < 1e-6
    NI, NIa = entropy_power(d) * fisher(d), entropy_power(da) * fisher(da)
    assert abs(NIa / NI - 1) < 1e-5


@settings(max_examples=8, deadline=None)
@given(st.lists(st.sampled_from(["gaussian:sigma2=0.5", "logistic", "gumbel:scale=2"]), min_size=2, max_size=3))
def test_product_additivity(specs):
    fs = [from_family(s) for s in specs]
    p = product(*fs)
    assert_allclose(entropy(p), sum(entropy(f) for f in fs), rtol=1e-13)
    assert_allclose(fisher(p), sum(fisher(f) for f in fs), rtol=1e-13)
    assert_allclose(j_functional(p), sum(j_functional(f) for f in fs), rtol=1e-13)


class TestDem:
    @pytest.mark.parametrize("spec,t", [("gumbel:scale=1", 0.5), ("logistic", 0.5), ("gamma:shape=2", 0.5)])
    def test_p_at_least_one(self, spec, t):
        r = record(flow_for(spec), t)
        assert r.p >= 1 - 1e-10
        assert r.I_tilde == r.n / r.I

    def test_gamma_ineK_consistency(self):
        r = record(flow_for("gamma:shape=2,scale=1"), 0.5)
        assert r.K >= 2 * r.J**2 / r.I - 1e-4


class TestCrossTerm:
    def test_one_dimension(self):
        f, g = from_family("logistic"), from_family("gumbel")
        assert_allclose(cross_term(f, g), fisher(f) * fisher(g), rtol=1e-14)

    def test_against_gaussian_noise(self):
        f = from_family("logistic")
        t = 0.4
        assert abs(cross_term(f, from_family(f"gaussian:sigma2={t}")) / (fisher(f) / t) - 1) < 1e-6

    def test_standard_gaussians(self):
        g = from_family("gaussian")
        assert abs(cross_term(g, g) - 1) < 1e-9

    def test_products_sum_diagonal(self):
        f = product(from_family("logistic"), from_family("gaussian"))
        g = product(from_family("gumbel"), from_family("gaussian:sigma2=2"))
        ref = fisher(from_family("logistic")) * fisher(from_family("gumbel")) + 0.5
        assert abs(cross_term(f, g) / ref - 1) < 1e-10

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cross_term(from_family("gaussian"), product(from_family("gaussian"), from_family("gaussian")))


class TestPreconditions:
    @pytest.mark.parametrize("fn", [fisher, j_functional])
    def test_kinked_at_zero(self, fn):
        with pytest.raises(NonsmoothAtZeroTime):
            fn(from_family("laplace"))

    def test_entropy_of_kinked_is_fine(self):
        # H(Laplace(1)) = 1 + log 2
        assert abs(entropy(from_family("laplace")) - (1 + math.log(2))) < 1e-8

    def test_j_grid_too_coarse(self):
        with pytest.raises(GridTooCoarse):
            j_functional(to_grid(from_family("gaussian"), 512))

    def test_not_normalized(self):
        x = np.linspace(-8, 8, 2049)
        with pytest.raises(NotNormalized):
            fisher(GridDensity(-8.0, 8.0, 2049, -x * x / 2))

    def test_k_step_too_large(self):
        with pytest.raises(StepTooLarge):
            k_functional(from_family("gaussian"), 0.1, 0.05)

    def test_k_absent_at_t_min(self):
        from entropyflow import T_MIN

        r = record(parse_density("laplace"), T_MIN, h=T_MIN)
        assert r.K is None and r.K_err is None
