"""Entropy, Fisher information and the higher functionals J and K.

All integrals use the corrected trapezoid weights of the grid. Derivatives
of log f come from centered fourth-order differences of ``logf``; nodes
whose density lies more than ``floor`` nats below the peak are dropped
from the derivative functionals (their quotients are noise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .density import (
    DEFAULT_M,
    DEFAULT_TAIL_EPS,
    LOG_ZERO,
    AnalyticDensity,
    Density,
    GridDensity,
    ProductDensity,
    to_grid,
)
from .errors import DimensionMismatch, GridTooCoarse, NonsmoothAtZeroTime, NotNormalized, StepTooLarge
from .heatflow import Flow

DEFAULT_H = 1e-3
# nats below the peak that still count as {f > 0}; e^-46 is about 1e-20
FLOOR_NATS = 46.0
MIN_J_NODES = 1024
_MASS_TOL = 1e-8


def _grid(d, m: int = DEFAULT_M, tail_eps: float = DEFAULT_TAIL_EPS) -> GridDensity:
    g = to_grid(d, m, tail_eps)
    if abs(g.mass() - 1.0) > _MASS_TOL:
        raise NotNormalized(f"{g.label}: mass {g.mass():.12g}")
    return g


def _factors(d: Density):
    return d.factors if isinstance(d, ProductDensity) else (d,)


def _require_smooth(d, what: str) -> None:
    if d.nonsmooth:
        raise NonsmoothAtZeroTime(f"{what} of {d.label} needs heat smoothing first (evolve to t >= t_min)")


def _log_derivatives(g: GridDensity, floor: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """First and second derivatives of log f on usable interior nodes, with weights."""
    lf, h = g.logf, g.h
    d1 = (lf[:-4] - 8 * lf[1:-3] + 8 * lf[3:-1] - lf[4:]) / (12 * h)
    d2 = (-lf[:-4] + 16 * lf[1:-3] - 30 * lf[2:-2] + 16 * lf[3:-1] - lf[4:]) / (12 * h * h)
    level = lf.max() - floor
    ok = np.ones(g.m - 4, dtype=bool)
    for k in range(5):
        ok &= lf[k:g.m - 4 + k] >= level
    wf = np.where(ok, g.weights[2:-2] * np.exp(np.where(ok, lf[2:-2], 0.0)), 0.0)
    return np.where(ok, d1, 0.0), np.where(ok, d2, 0.0), wf


def entropy(d: Density, floor: float = FLOOR_NATS, m: int = DEFAULT_M, tail_eps: float = DEFAULT_TAIL_EPS) -> float:
    """Differential entropy in nats, with 0 log 0 = 0 below the floor."""
    if isinstance(d, ProductDensity):
        return float(sum(entropy(f, floor, m, tail_eps) for f in d.factors))
    g = _grid(d, m, tail_eps)
    lf = g.logf
    ok = (lf > LOG_ZERO) & (lf >= lf.max() - floor)
    return float(-np.sum(np.where(ok, g.weights * np.exp(lf) * lf, 0.0)))


def entropy_power(d: Density, **kw) -> float:
    """N = exp(2H/n) / (2 pi e)."""
    return math.exp(2 * entropy(d, **kw) / d.n) / (2 * math.pi * math.e)


def fisher(d: Density, floor: float = FLOOR_NATS, m: int = DEFAULT_M, tail_eps: float = DEFAULT_TAIL_EPS) -> float:
    """Fisher information; additive over product factors."""
    if isinstance(d, ProductDensity):
        return float(sum(fisher(f, floor, m, tail_eps) for f in d.factors))
    _require_smooth(d, "fisher")
    d1, _, wf = _log_derivatives(_grid(d, m, tail_eps), floor)
    return float(np.sum(wf * d1 * d1))


def j_functional(d: Density, floor: float = FLOOR_NATS, m: int = DEFAULT_M, tail_eps: float = DEFAULT_TAIL_EPS) -> float:
    """Integral of the squared second derivative of log f against f."""
    if isinstance(d, ProductDensity):
        return float(sum(j_functional(f, floor, m, tail_eps) for f in d.factors))
    _require_smooth(d, "J")
    g = _grid(d, m, tail_eps)
    if g.m < MIN_J_NODES:
        raise GridTooCoarse(f"J needs at least {MIN_J_NODES} nodes, grid has {g.m}")
    _, d2, wf = _log_derivatives(g, floor)
    return float(np.sum(wf * d2 * d2))


def as_flow(base, m: int = DEFAULT_M, tail_eps: float = DEFAULT_TAIL_EPS) -> Flow:
    return base if isinstance(base, Flow) else Flow(base, m, tail_eps)


def flow_value(flow: Flow, name: str, t: float) -> float:
    """Memoized functional of X + Z_t; ``name`` is one of H, I, J."""
    fn = {"H": entropy, "I": fisher, "J": j_functional}[name]
    return flow.cached(name, t, fn)


@dataclass(frozen=True)
class KEstimate:
    value: float
    err_est: float
    h: float


def k_admissible(flow: Flow, t: float, h: float) -> bool:
    return t - 2 * h >= flow.t_floor - 1e-12 and h <= t / 4 * (1 + 1e-12)


def k_functional(base, t: float, h: float = DEFAULT_H, m: int = DEFAULT_M, tail_eps: float = DEFAULT_TAIL_EPS) -> KEstimate:
    """K = -dJ/dt by extrapolated centered differences of J along the flow.

    The value combines the stencils t +- h and t +- 2h, which cancels the
    h^2 error term. The error estimate compares it with the same
    combination at half the step (nodes t +- h/2), so it scales like h^4.
    """
    flow = as_flow(base, m, tail_eps)
    if not h > 0:
        raise StepTooLarge(f"step must be positive, got {h!r}")
    if not k_admissible(flow, t, h):
        raise StepTooLarge(f"K at t={t:g} with h={h:g} needs t - 2h >= {flow.t_floor:g} and h <= t/4")

    def D(k):
        return (flow_value(flow, "J", t + k) - flow_value(flow, "J", t - k)) / (2 * k)

    def E(k):
        return (4 * D(k) - D(2 * k)) / 3

    e_h, e_half = E(h), E(h / 2)
    return KEstimate(-e_h, abs(e_half - e_h), h)


def cross_term(f: Density, g: Density, **kw) -> float:
    """Sum over coordinates of I(f_i) I(g_i); off-diagonal terms vanish for products."""
    if f.n != g.n:
        raise DimensionMismatch(f"dimensions differ: {f.n} vs {g.n}")
    return float(sum(fisher(a, **kw) * fisher(b, **kw) for a, b in zip(_factors(f), _factors(g))))


@dataclass(frozen=True)
class FunctionalRecord:
    """Functionals of X + Z_t. ``K`` is None when the stencil does not fit."""

    t: float
    H: float
    N: float
    I: float
    I_tilde: float
    J: float
    K: Optional[float]
    n: int
    K_err: Optional[float] = None

    @property
    def p(self) -> float:
        """nJ / I^2, which is at least one."""
        return self.n * self.J / self.I**2


def gaussian_oracle(sigma: float, n: int = 1) -> FunctionalRecord:
    """Closed forms for the centered Gaussian with covariance sigma times the identity."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    return FunctionalRecord(
        t=0.0,
        H=0.5 * n * math.log(2 * math.pi * math.e * sigma),
        N=sigma,
        I=n / sigma,
        I_tilde=sigma,
        J=n / sigma**2,
        K=2 * n / sigma**3,
        n=n,
        K_err=0.0,
    )


def record(base, t: float, h: float = DEFAULT_H, m: int = DEFAULT_M, tail_eps: float = DEFAULT_TAIL_EPS) -> FunctionalRecord:
    """All functionals of X + Z_t at once."""
    flow = as_flow(base, m, tail_eps)
    H = flow_value(flow, "H", t)
    I = flow_value(flow, "I", t)
    J = flow_value(flow, "J", t)
    n = flow.n
    K = k_functional(flow, t, h) if k_admissible(flow, t, h) else None
    return FunctionalRecord(
        t=float(t),
        H=H,
        N=math.exp(2 * H / n) / (2 * math.pi * math.e),
        I=I,
        I_tilde=n / I,
        J=J,
        K=None if K is None else K.value,
        n=n,
        K_err=None if K is None else K.err_est,
    )
