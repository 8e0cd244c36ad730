"""Catalog of analytic log-concave families.

Each family exposes ``log f`` and its first two derivatives in closed form,
its support, interior kink locations, and a frozen ``scipy.stats``
distribution used only to place discretization windows (quantiles).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from ..errors import ParamOutOfRange, UnknownFamily

# log of zero density (finite sentinel so grids stay finite)
LOG_ZERO = -1.0e4


class Family:
    name: str = ""
    keys: dict[str, float] = {}
    constraints: str = ""
    # True when log f is not smooth on the whole line (support edge or kink)
    kinked: bool = False

    def validate(self, p: dict) -> None:
        pass

    def support(self, p: dict) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def kinks(self, p: dict) -> tuple[float, ...]:
        """Interior points where log f is not differentiable."""
        return ()

    def edge_powers(self, p: dict) -> tuple:
        """Algebraic behaviour of f at finite support edges, per side.

        Each side is None or ``(e0, step)``: near the edge f is a series in
        d^(e0 + j*step + l), d the distance to the edge, j, l >= 0.
        """
        return (None, None)

    def dist(self, p: dict):
        raise NotImplementedError

    def logpdf(self, x, p):
        raise NotImplementedError

    def dlogpdf(self, x, p):
        raise NotImplementedError

    def d2logpdf(self, x, p):
        raise NotImplementedError

    def dilate(self, p: dict, a: float) -> dict:
        raise NotImplementedError


def _positive(p, *names):
    for n in names:
        if not p[n] > 0 or not math.isfinite(p[n]):
            raise ParamOutOfRange(f"{n} must be a positive finite number, got {p[n]!r}")


def _masked(x, lo, hi, values, inside_open=True):
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, LOG_ZERO)
    if inside_open:
        m = (x > lo) & (x < hi)
    else:
        m = (x >= lo) & (x <= hi)
    out[m] = values(x[m])
    return out


class Gaussian(Family):
    name = "gaussian"
    keys = {"mu": 0.0, "sigma2": 1.0}
    constraints = "sigma2 > 0"

    def validate(self, p):
        _positive(p, "sigma2")

    def dist(self, p):
        return stats.norm(loc=p["mu"], scale=math.sqrt(p["sigma2"]))

    def logpdf(self, x, p):
        x = np.asarray(x, dtype=float)
        return -((x - p["mu"]) ** 2) / (2 * p["sigma2"]) - 0.5 * math.log(2 * math.pi * p["sigma2"])

    def dlogpdf(self, x, p):
        return -(np.asarray(x, dtype=float) - p["mu"]) / p["sigma2"]

    def d2logpdf(self, x, p):
        return np.full(np.shape(x), -1.0 / p["sigma2"])

    def dilate(self, p, a):
        return {"mu": a * p["mu"], "sigma2": a * a * p["sigma2"]}


class Laplace(Family):
    name = "laplace"
    keys = {"scale": 1.0, "loc": 0.0}
    constraints = "scale > 0"
    kinked = True

    def validate(self, p):
        _positive(p, "scale")

    def kinks(self, p):
        return (p["loc"],)

    def dist(self, p):
        return stats.laplace(loc=p["loc"], scale=p["scale"])

    def logpdf(self, x, p):
        b = p["scale"]
        return -np.abs(np.asarray(x, dtype=float) - p["loc"]) / b - math.log(2 * b)

    def dlogpdf(self, x, p):
        return -np.sign(np.asarray(x, dtype=float) - p["loc"]) / p["scale"]

    def d2logpdf(self, x, p):
        return np.zeros(np.shape(x))

    def dilate(self, p, a):
        return {"scale": a * p["scale"], "loc": a * p["loc"]}


class Logistic(Family):
    name = "logistic"
    keys = {"scale": 1.0, "loc": 0.0}
    constraints = "scale > 0"

    def validate(self, p):
        _positive(p, "scale")

    def dist(self, p):
        return stats.logistic(loc=p["loc"], scale=p["scale"])

    def logpdf(self, x, p):
        s = p["scale"]
        z = np.abs((np.asarray(x, dtype=float) - p["loc"]) / s)
        return -z - 2.0 * np.log1p(np.exp(-z)) - math.log(s)

    def dlogpdf(self, x, p):
        s = p["scale"]
        return -np.tanh((np.asarray(x, dtype=float) - p["loc"]) / (2 * s)) / s

    def d2logpdf(self, x, p):
        s = p["scale"]
        c = np.cosh((np.asarray(x, dtype=float) - p["loc"]) / (2 * s))
        return -0.5 / (s * s * c * c)

    def dilate(self, p, a):
        return {"scale": a * p["scale"], "loc": a * p["loc"]}


class Gumbel(Family):
    name = "gumbel"
    keys = {"scale": 1.0, "loc": 0.0}
    constraints = "scale > 0"

    def validate(self, p):
        _positive(p, "scale")

    def dist(self, p):
        return stats.gumbel_r(loc=p["loc"], scale=p["scale"])

    def logpdf(self, x, p):
        b = p["scale"]
        z = (np.asarray(x, dtype=float) - p["loc"]) / b
        with np.errstate(over="ignore"):
            out = -z - np.exp(-z) - math.log(b)
        return np.maximum(out, LOG_ZERO)

    def dlogpdf(self, x, p):
        b = p["scale"]
        z = (np.asarray(x, dtype=float) - p["loc"]) / b
        with np.errstate(over="ignore"):
            return (np.exp(-z) - 1.0) / b

    def d2logpdf(self, x, p):
        b = p["scale"]
        z = (np.asarray(x, dtype=float) - p["loc"]) / b
        with np.errstate(over="ignore"):
            return -np.exp(-z) / (b * b)

    def dilate(self, p, a):
        return {"scale": a * p["scale"], "loc": a * p["loc"]}


class Gamma(Family):
    name = "gamma"
    keys = {"shape": 2.0, "scale": 1.0}
    constraints = "shape >= 1, scale > 0"
    kinked = True

    def validate(self, p):
        _positive(p, "scale")
        if not p["shape"] >= 1:
            raise ParamOutOfRange(f"gamma shape must be >= 1 for log-concavity, got {p['shape']!r}")

    def support(self, p):
        return (0.0, math.inf)

    def edge_powers(self, p):
        return ((p["shape"] - 1, 1.0), None)

    def dist(self, p):
        return stats.gamma(a=p["shape"], scale=p["scale"])

    def logpdf(self, x, p):
        k, th = p["shape"], p["scale"]
        c = -special.gammaln(k) - k * math.log(th)
        if k == 1:
            return _masked(x, 0.0, math.inf, lambda y: c - y / th, inside_open=False)
        return _masked(x, 0.0, math.inf, lambda y: (k - 1) * np.log(y) - y / th + c)

    def dlogpdf(self, x, p):
        k, th = p["shape"], p["scale"]
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, (k - 1) / x - 1 / th, np.nan)

    def d2logpdf(self, x, p):
        k = p["shape"]
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, -(k - 1) / (x * x), np.nan)

    def dilate(self, p, a):
        return {"shape": p["shape"], "scale": a * p["scale"]}


class Weibull(Family):
    name = "weibull"
    keys = {"shape": 2.0, "scale": 1.0}
    constraints = "shape >= 1, scale > 0"
    kinked = True

    def validate(self, p):
        _positive(p, "scale")
        if not p["shape"] >= 1:
            raise ParamOutOfRange(f"weibull shape must be >= 1 for log-concavity, got {p['shape']!r}")

    def support(self, p):
        return (0.0, math.inf)

    def edge_powers(self, p):
        return ((p["shape"] - 1, p["shape"]), None)

    def dist(self, p):
        return stats.weibull_min(c=p["shape"], scale=p["scale"])

    def logpdf(self, x, p):
        k, lam = p["shape"], p["scale"]
        c = math.log(k / lam)
        if k == 1:
            return _masked(x, 0.0, math.inf, lambda y: c - y / lam, inside_open=False)
        return _masked(x, 0.0, math.inf, lambda y: c + (k - 1) * np.log(y / lam) - (y / lam) ** k)

    def dlogpdf(self, x, p):
        k, lam = p["shape"], p["scale"]
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, (k - 1) / x - (k / lam) * (x / lam) ** (k - 1), np.nan)

    def d2logpdf(self, x, p):
        k, lam = p["shape"], p["scale"]
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, -(k - 1) / (x * x) - k * (k - 1) / lam**2 * (x / lam) ** (k - 2), np.nan)

    def dilate(self, p, a):
        return {"shape": p["shape"], "scale": a * p["scale"]}


class Beta(Family):
    name = "beta"
    keys = {"a": 2.0, "b": 2.0, "scale": 1.0}
    constraints = "a >= 1, b >= 1, scale > 0 (support [0, scale])"
    kinked = True

    def validate(self, p):
        _positive(p, "scale")
        if not (p["a"] >= 1 and p["b"] >= 1):
            raise ParamOutOfRange(f"beta needs a >= 1 and b >= 1 for log-concavity, got a={p['a']!r}, b={p['b']!r}")

    def support(self, p):
        return (0.0, p["scale"])

    def edge_powers(self, p):
        return ((p["a"] - 1, 1.0), (p["b"] - 1, 1.0))

    def dist(self, p):
        return stats.beta(p["a"], p["b"], scale=p["scale"])

    def logpdf(self, x, p):
        a, b, s = p["a"], p["b"], p["scale"]
        c = -special.betaln(a, b) - math.log(s)

        def inner(y):
            u = y / s
            out = np.full(u.shape, c)
            if a != 1:
                out += (a - 1) * np.log(u)
            if b != 1:
                out += (b - 1) * np.log1p(-u)
            return out

        closed = a == 1 and b == 1
        if closed:
            return _masked(x, 0.0, s, inner, inside_open=False)
        x = np.asarray(x, dtype=float)
        out = _masked(x, 0.0, s, inner)
        # finite endpoint values when the corresponding exponent is zero
        if a == 1:
            out[x == 0.0] = c
        if b == 1:
            out[x == s] = c
        return out

    def dlogpdf(self, x, p):
        a, b, s = p["a"], p["b"], p["scale"]
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where((x > 0) & (x < s), (a - 1) / x - (b - 1) / (s - x), np.nan)

    def d2logpdf(self, x, p):
        a, b, s = p["a"], p["b"], p["scale"]
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where((x > 0) & (x < s), -(a - 1) / x**2 - (b - 1) / (s - x) ** 2, np.nan)

    def dilate(self, p, a):
        return {"a": p["a"], "b": p["b"], "scale": a * p["scale"]}


class Exponential(Family):
    name = "exponential"
    keys = {"rate": 1.0}
    constraints = "rate > 0"
    kinked = True

    def validate(self, p):
        _positive(p, "rate")

    def support(self, p):
        return (0.0, math.inf)

    def edge_powers(self, p):
        return ((0.0, 1.0), None)

    def dist(self, p):
        return stats.expon(scale=1.0 / p["rate"])

    def logpdf(self, x, p):
        r = p["rate"]
        return _masked(x, 0.0, math.inf, lambda y: math.log(r) - r * y, inside_open=False)

    def dlogpdf(self, x, p):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, -p["rate"], np.nan)

    def d2logpdf(self, x, p):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, 0.0, np.nan)

    def dilate(self, p, a):
        return {"rate": p["rate"] / a}


FAMILIES: dict[str, Family] = {
    f.name: f
    for f in (Gaussian(), Laplace(), Logistic(), Gamma(), Weibull(), Beta(), Gumbel(), Exponential())
}


@dataclass(frozen=True)
class AnalyticDensity:
    """A member of the analytic log-concave catalog.

    ``params`` is stored as a sorted tuple of ``(name, value)`` pairs so the
    object is hashable; use :attr:`p` for dict access.
    """

    family: str
    params: tuple[tuple[str, float], ...]

    @classmethod
    def make(cls, family: str, **params: float) -> "AnalyticDensity":
        try:
            fam = FAMILIES[family]
        except KeyError:
            raise UnknownFamily(f"unknown family {family!r}; known: {', '.join(FAMILIES)}") from None
        unknown = set(params) - set(fam.keys)
        if unknown:
            raise ParamOutOfRange(f"{family} does not take parameter(s) {sorted(unknown)}")
        full = {**fam.keys, **{k: float(v) for k, v in params.items()}}
        fam.validate(full)
        return cls(family, tuple(sorted(full.items())))

    @property
    def fam(self) -> Family:
        return FAMILIES[self.family]

    @property
    def p(self) -> dict[str, float]:
        return dict(self.params)

    @property
    def n(self) -> int:
        return 1

    @property
    def nonsmooth(self) -> bool:
        """True when J and K need heat smoothing before evaluation."""
        p = self.p
        if self.family in ("gamma", "weibull") and p["shape"] == 1:
            return True
        return self.fam.kinked

    @property
    def gaussian(self) -> bool:
        return self.family == "gaussian"

    @property
    def support(self) -> tuple[float, float]:
        return self.fam.support(self.p)

    @property
    def kinks(self) -> tuple[float, ...]:
        return self.fam.kinks(self.p)

    @property
    def edge_powers(self) -> tuple:
        return self.fam.edge_powers(self.p)

    @property
    def label(self) -> str:
        return f"{self.family}:" + ",".join(f"{k}={v:g}" for k, v in self.params)

    def dist(self):
        return self.fam.dist(self.p)

    def logpdf(self, x):
        return self.fam.logpdf(x, self.p)

    def dlogpdf(self, x):
        return self.fam.dlogpdf(x, self.p)

    def d2logpdf(self, x):
        return self.fam.d2logpdf(x, self.p)

    def pdf(self, x):
        lf = self.logpdf(x)
        return np.where(lf <= LOG_ZERO, 0.0, np.exp(lf))
