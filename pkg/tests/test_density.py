import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate, stats

from entropyflow.density import (
    FAMILIES,
    LOG_ZERO,
    AnalyticDensity,
    GridDensity,
    ProductDensity,
    dilate,
    discretize,
    from_family,
    is_log_concave,
    mixture,
    normalize,
    parse_density,
    read_grid_csv,
    to_grid,
    write_grid_csv,
)
from entropyflow.errors import (
    DegenerateMass,
    GridFileError,
    NonpositiveScale,
    ParamOutOfRange,
    SpecError,
    UnknownFamily,
    WeightMismatch,
)

VALID = {
    "gaussian": {"mu": 0.3, "sigma2": 2.0},
    "laplace": {"scale": 1.5},
    "logistic": {"scale": 0.7},
    "gamma": {"shape": 2.5, "scale": 1.2},
    "weibull": {"shape": 1.7, "scale": 0.9},
    "beta": {"a": 2.0, "b": 3.0},
    "gumbel": {"scale": 1.3},
    "exponential": {"rate": 2.0},
}


def test_catalog_covered():
    assert set(VALID) == set(FAMILIES)


class TestParsing:
    def test_gaussian_spec(self):
        d = from_family("gaussian:mu=0,sigma2=1")
        assert d.family == "gaussian" and d.p == {"mu": 0.0, "sigma2": 1.0}
        x = np.linspace(-4, 4, 9)
        assert_allclose(d.logpdf(x), stats.norm.logpdf(x), rtol=0, atol=1e-14)

    def test_bare_name_uses_defaults(self):
        assert from_family("logistic") == from_family("logistic:scale=1")

    def test_gamma_shape_below_one_rejected(self):
        with pytest.raises(ParamOutOfRange):
            from_family("gamma:shape=0.5,scale=1")

    @pytest.mark.parametrize("spec", ["weibull:shape=0.9", "beta:a=0.5,b=2", "gaussian:sigma2=-1", "laplace:scale=0"])
    def test_non_log_concave_or_invalid_rejected(self, spec):
        with pytest.raises(ParamOutOfRange):
            from_family(spec)

    def test_unknown_family(self):
        with pytest.raises(UnknownFamily):
            from_family("cauchy:scale=1")

    @pytest.mark.parametrize("spec", ["gaussian:mu", "gaussian:mu=abc", "gaussian:nu=1", "grid:path=x", "product:"])
    def test_malformed(self, spec):
        with pytest.raises(SpecError):
            parse_density(spec)

    def test_logistic_unit_mass_by_quadrature(self):
        d = from_family("logistic:scale=1")
        mass, _ = integrate.quad(lambda x: math.exp(d.logpdf(np.array([x]))[0]), -np.inf, np.inf)
        assert abs(mass - 1) < 1e-10
        x = np.array([-2.0, 0.0, 1.5])
        assert_allclose(d.logpdf(x), -x - 2 * np.log1p(np.exp(-x)), atol=1e-14)

    def test_product_and_mixture(self):
        p = parse_density("product:gaussian|logistic:scale=2|gumbel")
        assert isinstance(p, ProductDensity) and p.n == 3
        g = parse_density("mix:0.5*gaussian:mu=-3,sigma2=1+0.5*gaussian:mu=3,sigma2=1")
        assert isinstance(g, GridDensity)
        assert abs(g.mass() - 1) < 1e-12

    def test_mixture_weights_must_sum_to_one(self):
        with pytest.raises(WeightMismatch):
            parse_density("mix:0.5*gaussian+0.6*logistic")

    def test_single_component_mixture(self):
        with pytest.raises(WeightMismatch):
            mixture([from_family("gaussian")], [1.0])


@pytest.mark.parametrize("family", sorted(VALID))
class TestCatalog:
    def test_moments_match_closed_forms(self, family):
        d = AnalyticDensity.make(family, **VALID[family])
        g = discretize(d, 4096)
        dist = d.dist()
        mean, var = dist.mean(), dist.var()
        gm = g.moment(1)
        assert_allclose(gm, mean, rtol=1e-6, atol=1e-9)
        assert_allclose(g.moment(2) - gm**2, var, rtol=1e-6)

    def test_mass_and_tails(self, family):
        d = AnalyticDensity.make(family, **VALID[family])
        g = discretize(d, 4096, 1e-12)
        assert abs(g.mass() - 1) < 1e-8
        dist = d.dist()
        assert dist.cdf(g.lo) + dist.sf(g.hi) < 1e-10

    def test_log_concave(self, family):
        d = AnalyticDensity.make(family, **VALID[family])
        assert is_log_concave(d, 1e-8)[0]
        assert is_log_concave(discretize(d, 1024), 1e-8)[0]

    def test_exact_log_density(self, family):
        d = AnalyticDensity.make(family, **VALID[family])
        dist = d.dist()
        lo, hi = dist.ppf([0.01, 0.99])
        x = np.linspace(lo, hi, 50)
        assert_allclose(d.logpdf(x), dist.logpdf(x), rtol=1e-12, atol=1e-12)

    def test_double_dilation_is_identity(self, family):
        d = AnalyticDensity.make(family, **VALID[family])
        back = dilate(dilate(d, 2.5), 1 / 2.5)
        x = np.linspace(*d.dist().ppf([0.05, 0.95]), 21)
        assert_allclose(back.logpdf(x), d.logpdf(x), atol=1e-10)


class TestDiscretize:
    def test_gaussian_window(self):
        g = discretize(from_family("gaussian"), 4096, 1e-12)
        assert_allclose([g.lo, g.hi], [-7.13, 7.13], atol=0.01)
        assert 2 * stats.norm.sf(g.hi) <= 1e-12 * (1 + 1e-9)

    def test_exponential_support_edge(self):
        g = discretize(from_family("exponential:rate=1"), 4096)
        assert g.lo == 0.0

    @pytest.mark.parametrize("spec", ["gamma:shape=1.2", "weibull:shape=1.3", "beta:a=1.5,b=1.2"])
    def test_fractional_edge_powers(self, spec):
        # f ~ d^e at the edge with e fractional; plain Gregory weights lose accuracy here
        d = from_family(spec)
        g = discretize(d, 1024)
        assert g.edges[0] is not None
        assert_allclose(g.moment(1), d.dist().mean(), rtol=1e-7)

    def test_too_few_nodes(self):
        with pytest.raises(ValueError):
            discretize(from_family("gaussian"), 8)

    def test_laplace_kink_on_node(self):
        g = discretize(from_family("laplace:scale=1"), 4097)
        assert g.breaks and abs(g.x[g.breaks[0]]) < 1e-12


class TestNormalize:
    def test_uniform(self):
        g = normalize(GridDensity(0.0, 1.0, 64, np.full(64, 3.7)))
        assert_allclose(g.logf, 0.0, atol=1e-14)

    def test_prescaled_gaussian(self):
        x = np.linspace(-8, 8, 2001)
        g = normalize(GridDensity(-8.0, 8.0, 2001, -x * x / 2 + math.log(2)))
        assert_allclose(g.logf, stats.norm.logpdf(x), atol=1e-12)
        assert abs(g.mass() - 1) < 1e-12

    def test_degenerate(self):
        with pytest.raises(DegenerateMass):
            normalize(GridDensity(0.0, 1.0, 32, np.full(32, -800.0)))

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(-2.0, 2.0), min_size=3, max_size=3), st.floats(-50.0, 50.0))
    def test_random_log_concave_idempotent(self, coef, shift):
        x = np.linspace(-5, 5, 513)
        # convex potential: quadratic plus softplus terms
        phi = 0.5 * x * x + abs(coef[0]) * np.logaddexp(0, coef[1] * x) + coef[2] * x
        g = normalize(GridDensity(-5.0, 5.0, 513, -phi + shift))
        assert abs(g.mass() - 1) < 1e-12
        gg = normalize(g)
        assert np.max(np.abs(gg.logf - g.logf)) < 1e-14
        assert is_log_concave(g, 1e-8)[0]


class TestLogConcavity:
    def test_gaussian_worst_is_minus_one(self):
        ok, worst, _ = is_log_concave(from_family("gaussian:sigma2=1"))
        assert ok and abs(worst + 1) < 1e-6

    def test_bimodal_mixture(self):
        g = parse_density("mix:0.5*gaussian:mu=-3,sigma2=1+0.5*gaussian:mu=3,sigma2=1")
        ok, worst, where = is_log_concave(g)
        assert not ok and abs(where) < 0.5
        # (log f)'' = -1 + 9 sech^2(3x) for this mixture, largest at 0
        assert abs(worst - 8) < 0.1

    def test_unimodal_scale_mixture_not_log_concave(self):
        g = parse_density("mix:0.9*gaussian:sigma2=1+0.1*gaussian:sigma2=9")
        assert not is_log_concave(g)[0]

    def test_laplace(self):
        assert is_log_concave(from_family("laplace:scale=1"))[0]
        assert is_log_concave(discretize(from_family("laplace:scale=1"), 4097))[0]


class TestDilate:
    def test_gaussian(self):
        assert dilate(from_family("gaussian:sigma2=1"), 2) == from_family("gaussian:sigma2=4")

    def test_identity(self):
        d = from_family("gumbel")
        assert dilate(d, 1) is d

    def test_logistic_pointwise(self):
        a = dilate(from_family("logistic:scale=1"), 3)
        x = np.linspace(-20, 20, 41)
        ref = stats.logistic(scale=3).logpdf(x)
        assert_allclose(a.logpdf(x), ref, atol=1e-12)

    def test_grid_dilation_keeps_mass(self):
        g = dilate(discretize(from_family("gumbel"), 1024), 0.5)
        assert abs(g.mass() - 1) < 1e-12

    def test_nonpositive(self):
        with pytest.raises(NonpositiveScale):
            dilate(from_family("gaussian"), 0)


class TestGridFile:
    def test_round_trip(self, tmp_path):
        g = to_grid(from_family("logistic:scale=1"), 2048)
        p = tmp_path / "g.csv"
        write_grid_csv(g, p)
        back = read_grid_csv(p)
        assert back.m == g.m
        assert_allclose(back.logf, g.logf, rtol=1e-12, atol=1e-13)
        assert parse_density(f"grid:file={p}").m == g.m

    def test_header_required(self, tmp_path):
        p = tmp_path / "g.csv"
        p.write_text("\n".join(f"{i},{-i * i / 100}" for i in range(40)))
        with pytest.raises(GridFileError):
            read_grid_csv(p)

    def test_nonuniform_rejected(self, tmp_path):
        p = tmp_path / "g.csv"
        xs = np.linspace(0, 1, 40) ** 1.1
        p.write_text("x,logf\n" + "\n".join(f"{float(x)!r},0" for x in xs))
        with pytest.raises(GridFileError):
            read_grid_csv(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(GridFileError):
            read_grid_csv(tmp_path / "nope.csv")

    def test_low_values_clamped(self, tmp_path):
        p = tmp_path / "g.csv"
        xs = np.linspace(-1, 1, 64)
        p.write_text("x,logf\n" + "\n".join(f"{float(x)!r},{-1e6 if abs(x) > 0.9 else 0.0}" for x in xs))
        assert read_grid_csv(p).logf.min() == LOG_ZERO
