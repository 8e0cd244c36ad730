"""Time derivatives along the heat flow and the exact flow identities.

Every derivative claim is evaluated twice: once in closed form from the
functionals at a single time, and once by differencing a curve in t.
Agreement of the two paths is what separates a numerical artefact from
a genuine effect.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from .density import DEFAULT_M, DEFAULT_TAIL_EPS
from .errors import StencilOutOfDomain
from .functionals import DEFAULT_H, FunctionalRecord, as_flow, flow_value, k_functional, record
from .heatflow import Flow


@dataclass(frozen=True)
class DerivativeEstimate:
    t: float
    order: int
    value: float
    err_est: float
    h: float


# centered stencils (offsets in units of the step, weights) with O(h^2) error
_STENCILS = {
    1: ((-1, -0.5), (1, 0.5)),
    2: ((-1, 1.0), (0, -2.0), (1, 1.0)),
    3: ((-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)),
}


def stencil_reach(order: int) -> int:
    """Largest offset, in steps, used by :func:`d_dt` (the doubled stencil)."""
    return 2 * max(abs(o) for o, _ in _STENCILS[order])


def d_dt(
    curve: Callable[[float], float],
    t0: float,
    order: int = 1,
    h: float = DEFAULT_H,
    t_floor: Optional[float] = 0.0,
) -> DerivativeEstimate:
    """Derivative of ``curve`` at ``t0`` by centered differences.

    One Richardson level combines steps h and 2h; ``err_est`` is the gap
    between the extrapolated and the plain step-h value. With ``t_floor``
    set, the stencil must stay at or above it and h must not exceed
    (t0 - t_floor)/8; pass ``None`` for curves defined on the whole line.
    """
    if order not in _STENCILS:
        raise ValueError(f"order must be 1, 2 or 3, got {order!r}")
    if not h > 0:
        raise StencilOutOfDomain(f"step must be positive, got {h!r}")
    reach = stencil_reach(order)
    if t_floor is not None:
        if h > (t0 - t_floor) / 8 * (1 + 1e-12) or t0 - reach * h < t_floor - 1e-12:
            raise StencilOutOfDomain(
                f"order-{order} stencil at t={t0:g} with h={h:g} leaves the domain t >= {t_floor:g}"
            )

    def D(k):
        return sum(w * curve(t0 + o * k) for o, w in _STENCILS[order]) / k**order

    d_h, d_2h = D(h), D(2 * h)
    ext = (4 * d_h - d_2h) / 3
    return DerivativeEstimate(float(t0), order, ext, abs(ext - d_h), h)


def _curve(flow: Flow, name: str) -> Callable[[float], float]:
    return lambda s: flow_value(flow, name, s)


def _floor(flow: Flow) -> float:
    return flow.t_floor


@dataclass(frozen=True)
class IdentityResidual:
    """Relative gap between a differenced side and a closed-form side."""

    residual: float
    lhs: float
    rhs: float
    err_est: float

    def __float__(self) -> float:
        return self.residual


def _identity(lhs: DerivativeEstimate, rhs: float) -> IdentityResidual:
    return IdentityResidual(abs(lhs.value - rhs) / abs(rhs), lhs.value, rhs, lhs.err_est)


def check_debruijn(base, t: float, h: float = DEFAULT_H, m: int = DEFAULT_M, tail_eps: float = DEFAULT_TAIL_EPS) -> IdentityResidual:
    """dH/dt against I/2."""
    flow = as_flow(base, m, tail_eps)
    lhs = d_dt(_curve(flow, "H"), t, 1, h, _floor(flow))
    return _identity(lhs, 0.5 * flow_value(flow, "I", t))


def check_JJ(base, t: float, h: float = DEFAULT_H, m: int = DEFAULT_M, tail_eps: float = DEFAULT_TAIL_EPS) -> IdentityResidual:
    """-dI/dt against J."""
    flow = as_flow(base, m, tail_eps)
    lhs = d_dt(lambda s: -flow_value(flow, "I", s), t, 1, h, _floor(flow))
    return _identity(lhs, flow_value(flow, "J", t))


def check_KK(base, t: float, h: float = DEFAULT_H, m: int = DEFAULT_M, tail_eps: float = DEFAULT_TAIL_EPS) -> IdentityResidual:
    """K = -dJ/dt against the second t-derivative of I.

    Since J = -dI/dt, the same K is also d^2 I / dt^2; differencing I
    twice is independent of the J-differences that define K.
    """
    flow = as_flow(base, m, tail_eps)
    lhs = d_dt(_curve(flow, "I"), t, 2, h, _floor(flow))
    return _identity(lhs, k_functional(flow, t, h).value)


@dataclass(frozen=True)
class NDerivatives:
    """Closed-form t-derivatives of N(X + Z_t) and their differenced counterparts."""

    d1: float
    d2: float
    d3: float
    direct: tuple[DerivativeEstimate, ...]
    err: tuple[float, float, float]
    record: FunctionalRecord

    @property
    def scale(self) -> float:
        """N I / n, the natural size of every derivative of N."""
        r = self.record
        return r.N * r.I / r.n

    def __iter__(self):
        return iter((self.d1, self.d2, self.d3))


@dataclass(frozen=True)
class ITildeDerivatives:
    d1: float
    d2: float
    direct: tuple[DerivativeEstimate, ...]
    err: tuple[float, float]
    record: FunctionalRecord

    def __iter__(self):
        return iter((self.d1, self.d2))


def _direct_step(t: float, h: float, order: int, floor: float) -> float:
    # higher derivatives amplify roundoff like h^-order: use a wider but admissible step
    wide = {1: h, 2: 5 * h, 3: 10 * h}[order]
    limit = (t - floor) / 8
    return max(h, min(wide, limit))


def _quad_rel(flow: Flow) -> float:
    return 1.0 / flow.m**2


def n_derivatives(base, t: float, h: float = DEFAULT_H, m: int = DEFAULT_M, tail_eps: float = DEFAULT_TAIL_EPS, direct: bool = True) -> NDerivatives:
    """First three t-derivatives of the entropy power along the flow."""
    flow = as_flow(base, m, tail_eps)
    r = record(flow, t, h)
    if r.K is None:
        raise StencilOutOfDomain(f"K unavailable at t={t:g} with h={h:g}")
    n, N, I, J, K = r.n, r.N, r.I, r.J, r.K
    d1 = N * I / n
    d2 = (N / n) * (I * I / n - J)
    d3 = (N / n) * (K + I**3 / n**2 - 3 * I * J / n)
    q = _quad_rel(flow)
    err = (
        d1 * q,
        (N / n) * (I * I / n + J) * q,
        (N / n) * (r.K_err + (abs(K) + I**3 / n**2 + 3 * I * J / n) * q),
    )
    dd: tuple[DerivativeEstimate, ...] = ()
    if direct:
        def Ncurve(s):
            return math.exp(2 * flow_value(flow, "H", s) / n) / (2 * math.pi * math.e)

        floor = _floor(flow)
        dd = tuple(d_dt(Ncurve, t, k, _direct_step(t, h, k, floor), floor) for k in (1, 2, 3))
    return NDerivatives(d1, d2, d3, dd, err, r)


def itilde_derivatives(base, t: float, h: float = DEFAULT_H, m: int = DEFAULT_M, tail_eps: float = DEFAULT_TAIL_EPS, direct: bool = True) -> ITildeDerivatives:
    """First two t-derivatives of the reciprocal Fisher information n/I."""
    flow = as_flow(base, m, tail_eps)
    r = record(flow, t, h)
    if r.K is None:
        raise StencilOutOfDomain(f"K unavailable at t={t:g} with h={h:g}")
    n, I, J, K = r.n, r.I, r.J, r.K
    d1 = n * J / I**2
    d2 = n * (2 * J * J / I**3 - K / I**2)
    q = _quad_rel(flow)
    err = (d1 * q, n * (r.K_err / I**2 + (2 * J * J / I**3 + abs(K) / I**2) * q))
    dd: tuple[DerivativeEstimate, ...] = ()
    if direct:
        floor = _floor(flow)
        curve = lambda s: n / flow_value(flow, "I", s)  # noqa: E731
        dd = tuple(d_dt(curve, t, k, _direct_step(t, h, k, floor), floor) for k in (1, 2))
    return ITildeDerivatives(d1, d2, dd, err, r)
