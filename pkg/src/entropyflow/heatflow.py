"""Gaussian noise addition (the heat semigroup) on grid densities.

The law of X + Z_t is the convolution of f with the centered Gaussian of
variance t. Convolutions are evaluated as discrete sums on the uniform grid
by FFT. A plain FFT product only carries absolute precision, so tails far
below the peak would be noise; each additional pass exponentially tilts
both sequences (a_j e^{-lam j}, b_n e^{-lam n}), which moves the accurate
band of the product to where the log-slope of the result equals ``lam``.
Passes repeat until every output node is resolved to roughly 1e-13
relative accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import fft as sfft
from scipy import special
from scipy.interpolate import CubicSpline

from .density import (
    DEFAULT_M,
    DEFAULT_TAIL_EPS,
    LOG_ZERO,
    AnalyticDensity,
    Density,
    GridDensity,
    ProductDensity,
    normalize,
    quadrature_weights,
    to_grid,
)
from .density.grid import sample
from .errors import FlowError, GridTooCoarse

# smallest noise time at which kinked families are differentiated
T_MIN = 1e-2
# kernel support, in standard deviations, added to each side of the window
WINDOW_SIGMAS = 8.0
# an FFT pass resolves nodes whose share of the pass maximum exceeds this
_TILT_ACCEPT = math.log(1e-3)
_MAX_PASSES = 200
_MASS_TOL = 1e-8
# widened windows stop where the density falls this far below its peak
_MARGIN_NATS = 150.0


def _fft_pass(la: np.ndarray, lb: np.ndarray, lam: float, n: int, L: int):
    ta = la - lam * np.arange(la.size)
    tb = lb - lam * np.arange(lb.size)
    A, B = ta.max(), tb.max()
    S = sfft.irfft(sfft.rfft(np.exp(ta - A), L) * sfft.rfft(np.exp(tb - B), L), L)[:n]
    top = S.max()
    with np.errstate(divide="ignore", invalid="ignore"):
        lS = np.where(S > 0, np.log(np.where(S > 0, S, 1.0)), -np.inf)
    return lS + A + B + lam * np.arange(n), lS - math.log(top)


def _direct(la: np.ndarray, lb: np.ndarray, ks: np.ndarray) -> np.ndarray:
    out = np.empty(ks.size)
    j = np.arange(la.size)
    for s in range(0, ks.size, 256):
        k = ks[s:s + 256, None]
        idx = k - j[None, :]
        ok = (idx >= 0) & (idx < lb.size)
        e = np.where(ok, la[None, :] + lb[np.clip(idx, 0, lb.size - 1)], -np.inf)
        out[s:s + 256] = special.logsumexp(e, axis=1)
    return out


def log_convolve(la: np.ndarray, lb: np.ndarray, k_lo: int = 0, k_hi: int | None = None) -> np.ndarray:
    """``log sum_j exp(la[j] + lb[k-j])`` for ``k_lo <= k < k_hi``.

    ``-inf`` (or anything at or below LOG_ZERO) in the inputs means zero.
    Accurate in relative terms at every output node, including tails many
    hundreds of nats below the peak.
    """
    la = np.where(la <= LOG_ZERO, -np.inf, la)
    lb = np.where(lb <= LOG_ZERO, -np.inf, lb)
    n = la.size + lb.size - 1
    k_hi = n if k_hi is None else k_hi
    L = sfft.next_fast_len(n, real=True)

    out, q = _fft_pass(la, lb, 0.0, n, L)
    out, q = out[k_lo:k_hi].copy(), q[k_lo:k_hi].copy()
    for _ in range(_MAX_PASSES):
        bad = np.flatnonzero(q < _TILT_ACCEPT)
        if bad.size == 0:
            break
        # first contiguous run of unresolved nodes
        gaps = np.flatnonzero(np.diff(bad) > 1)
        s, e = bad[0], bad[gaps[0]] if gaps.size else bad[-1]
        if s > 0:
            g, k = s - 1, max(s - 5, 0)
        elif e + 1 < q.size:
            g, k = e + 1, min(e + 5, q.size - 1)
        else:
            g = k = -1
        if g < 0 or g == k or not np.isfinite(out[g] - out[k]):
            out[s:e + 1] = _direct(la, lb, np.arange(s, e + 1) + k_lo)
            q[s:e + 1] = 0.0
            continue
        lam = (out[g] - out[k]) / (g - k)
        o2, q2 = _fft_pass(la, lb, lam, n, L)
        o2, q2 = o2[k_lo:k_hi], q2[k_lo:k_hi]
        better = q2 > q
        out[better] = o2[better]
        q[better] = q2[better]
        if not np.any(q[s:e + 1] >= _TILT_ACCEPT):
            out[s:e + 1] = _direct(la, lb, np.arange(s, e + 1) + k_lo)
            q[s:e + 1] = 0.0
    else:
        bad = np.flatnonzero(q < _TILT_ACCEPT)
        out[bad] = _direct(la, lb, bad + k_lo)
    return out


def weighted_log_convolve(w: np.ndarray, logf: np.ndarray, lb: np.ndarray, k_lo: int = 0,
                          k_hi: int | None = None) -> np.ndarray:
    """:func:`log_convolve` of ``w * exp(logf)`` with ``exp(lb)`` for signed weights ``w``.

    Negative weights (endpoint corrections) sit on a handful of nodes; their
    contribution is subtracted directly as a relative correction.
    """
    with np.errstate(divide="ignore"):
        out = log_convolve(np.log(np.maximum(w, 0.0)) + logf, lb, k_lo, k_hi)
    neg = np.flatnonzero((w < 0) & (logf > LOG_ZERO))
    if neg.size == 0:
        return out
    if k_hi is None:
        k_hi = w.size + lb.size - 1
    ks = np.arange(k_lo, k_hi)
    ratio = np.zeros(ks.size)
    for j in neg:
        idx = ks - j
        ok = (idx >= 0) & (idx < lb.size)
        e = np.where(ok, math.log(-w[j]) + logf[j] + lb[np.clip(idx, 0, lb.size - 1)] - out, -np.inf)
        ratio += np.exp(np.minimum(e, 0.0))
    return out + np.log1p(-np.minimum(ratio, 1.0 - 1e-300))


def _gaussian_log_kernel(t: float, h: float, shift: int, n_in: int, n_out: int) -> np.ndarray:
    u = (np.arange(n_out + n_in - 1) - (n_in - 1) + shift) * h
    return -u * u / (2 * t) - 0.5 * math.log(2 * math.pi * t)


def _support_weights(d: AnalyticDensity, lo: float, h: float, M: int) -> np.ndarray:
    """Quadrature weights for ``M`` nodes from ``lo``, restricted to the support."""
    s_lo, s_hi = d.support
    i_lo = 0 if not math.isfinite(s_lo) else max(int(round((s_lo - lo) / h)), 0)
    i_hi = M - 1 if not math.isfinite(s_hi) else min(int(round((s_hi - lo) / h)), M - 1)
    breaks = tuple(int(round((c - lo) / h)) - i_lo for c in d.kinks)
    left, right = d.edge_powers
    edges = (left if math.isfinite(s_lo) and abs(lo + i_lo * h - s_lo) < 1e-9 * h else None,
             right if math.isfinite(s_hi) and abs(lo + i_hi * h - s_hi) < 1e-9 * h else None)
    w = np.zeros(M)
    w[i_lo:i_hi + 1] = quadrature_weights(i_hi - i_lo + 1, h, breaks, edges)
    return w


def _evolve_direct(d, g: GridDensity, t: float, pad: int) -> tuple[float, np.ndarray]:
    """Gauss-Legendre quadrature of the convolution for kernels narrower than h."""
    h = g.h
    x = g.lo - pad * h + h * np.arange(g.m + 2 * pad)
    r = WINDOW_SIGMAS * math.sqrt(t)
    if isinstance(d, AnalyticDensity):
        logpdf = d.logpdf
        cuts = list(d.kinks) + [c for c in d.support if math.isfinite(c)]
    else:
        spline = CubicSpline(g.x, g.logf)

        def logpdf(y):
            inside = (y >= g.lo) & (y <= g.hi)
            return np.where(inside, spline(np.clip(y, g.lo, g.hi)), -np.inf)

        cuts = [g.x[b] for b in g.breaks]
    gx, gw = np.polynomial.legendre.leggauss(32)
    out = np.empty(x.size)
    for i, xi in enumerate(x):
        edges = sorted({xi - r, xi + r, *[c for c in cuts if xi - r < c < xi + r]})
        terms = []
        for a, b in zip(edges[:-1], edges[1:]):
            y = 0.5 * (b - a) * gx + 0.5 * (a + b)
            lf = np.asarray(logpdf(y), dtype=float)
            lf = np.where(lf <= LOG_ZERO, -np.inf, lf)
            terms.append(np.log(0.5 * (b - a) * gw) + lf - (xi - y) ** 2 / (2 * t))
        out[i] = special.logsumexp(np.concatenate(terms)) - 0.5 * math.log(2 * math.pi * t)
    return float(x[0]), np.maximum(np.nan_to_num(out, neginf=LOG_ZERO), LOG_ZERO)


def evolve(
    d: Density,
    t: float,
    m: int = DEFAULT_M,
    tail_eps: float = DEFAULT_TAIL_EPS,
    spacing: float | None = None,
    margin: float = 0.0,
):
    """Density of X + Z_t on the window enlarged by 8 sqrt(t) on each side.

    Analytic inputs are sampled exactly over the whole enlarged window, so
    the result is not limited by the truncation of the base; grid inputs
    are taken as zero outside their window. Products evolve factorwise and
    return a :class:`ProductDensity` of grids. ``spacing`` overrides the
    node spacing implied by ``m``; ``margin`` widens the window of an
    analytic base by up to that much on each side, as far as its density
    stays within ``_MARGIN_NATS`` of the peak (grid bases are unaffected).
    """
    if isinstance(d, ProductDensity):
        return ProductDensity(tuple(evolve(f, t, m, tail_eps, spacing, margin) for f in d.factors))
    if not t >= 0:
        raise ValueError(f"noise time must be nonnegative, got {t!r}")
    g = to_grid(d, m, tail_eps, spacing)
    h = g.h
    extra = int(math.ceil(margin / h)) if margin > 0 else 0
    if t == 0:
        return _widen(d, g, extra) if extra else g
    if extra and isinstance(d, AnalyticDensity):
        g = _widen(d, g, extra)
        g = trim(g, _MARGIN_NATS)
    pad = int(math.ceil(WINDOW_SIGMAS * math.sqrt(t) / h))
    M = g.m + 2 * pad
    x0 = g.lo - pad * h
    if t < h * h:
        x0, logf = _evolve_direct(d, g, t, pad)
    elif isinstance(d, AnalyticDensity):
        w = _support_weights(d, x0, h, M)
        lf = sample(d, x0, h, M)
        # same normalization as the discretized base
        lf = lf - special.logsumexp(np.where(w != 0, lf, -np.inf), b=w)
        lb = _gaussian_log_kernel(t, h, 0, M, M)
        logf = weighted_log_convolve(w, lf, lb, M - 1, 2 * M - 1)
    else:
        lb = _gaussian_log_kernel(t, h, -pad, g.m, M)
        logf = weighted_log_convolve(g.weights, g.logf, lb, g.m - 1, g.m - 1 + M)
    logf = np.maximum(logf, LOG_ZERO)
    out = GridDensity(x0, x0 + (M - 1) * h, M, logf, (), False, d.gaussian, f"{d.label}+Z({t:g})")
    mass = out.mass()
    if not abs(mass - 1.0) < _MASS_TOL:
        raise GridTooCoarse(f"evolve({d.label}, t={t:g}): mass error {mass - 1.0:.3e} before normalization")
    return normalize(out)


def _widen(d, g: GridDensity, extra: int) -> GridDensity:
    """``g`` with ``extra`` more nodes per side: sampled for analytic d, zero for grids.

    Sides where an analytic density has a finite support edge are left alone.
    """
    if isinstance(d, AnalyticDensity):
        s_lo, s_hi = d.support
        left = 0 if math.isfinite(s_lo) else extra
        right = 0 if math.isfinite(s_hi) else extra
        if left == right == 0:
            return g
        x0 = g.lo - left * g.h
        M = g.m + left + right
        logf = sample(d, x0, g.h, M)
    else:
        left = right = extra
        x0 = g.lo - left * g.h
        M = g.m + 2 * extra
        logf = np.concatenate([np.full(extra, LOG_ZERO), g.logf, np.full(extra, LOG_ZERO)])
    breaks = tuple(b + left for b in g.breaks)
    return normalize(GridDensity(x0, x0 + (M - 1) * g.h, M, logf, breaks, g.nonsmooth, g.gaussian, g.label))


def trim(g: GridDensity, nats: float = 120.0) -> GridDensity:
    """Crop to the nodes whose density is within ``nats`` of the peak."""
    keep = np.flatnonzero(g.logf >= g.logf.max() - nats)
    i0, i1 = int(keep[0]), int(keep[-1])
    if i1 - i0 + 1 < 16:
        return g
    return crop(g, g.lo + i0 * g.h, g.lo + i1 * g.h)


def crop(g: GridDensity, lo: float, hi: float) -> GridDensity:
    """Restriction of ``g`` to the nodes inside [lo, hi], renormalized."""
    i0 = max(int(math.ceil((lo - g.lo) / g.h - 1e-9)), 0)
    i1 = min(int(math.floor((hi - g.lo) / g.h + 1e-9)), g.m - 1)
    if i0 == 0 and i1 == g.m - 1:
        return g
    breaks = tuple(b - i0 for b in g.breaks if i0 < b < i1)
    out = GridDensity(g.lo + i0 * g.h, g.lo + i1 * g.h, i1 - i0 + 1, g.logf[i0:i1 + 1], breaks,
                      g.nonsmooth, g.gaussian, g.label)
    return normalize(out)


def convolve(f: GridDensity, g: GridDensity) -> GridDensity:
    """Density of X + Y for independent grid densities sharing a spacing."""
    if not math.isclose(f.h, g.h, rel_tol=1e-9):
        raise ValueError(f"grids must share a spacing (got {f.h!r} and {g.h!r})")
    logc = np.maximum(weighted_log_convolve(f.weights, f.logf, g.logf), LOG_ZERO)
    M = f.m + g.m - 1
    lo = f.lo + g.lo
    out = GridDensity(lo, lo + (M - 1) * f.h, M, logc, (), False,
                      f.gaussian and g.gaussian, f"({f.label})*({g.label})")
    return normalize(out)


def thin(g: GridDensity, m: int = DEFAULT_M) -> GridDensity:
    """Keep every k-th node, with k chosen so that about ``m`` nodes remain.

    A common spacing for two summands of very different widths can be far
    finer than either functional needs, and difference quotients of a
    convolution output amplify its rounding like h^-2 on such grids.
    """
    k = max(1, (g.m - 1) // (m - 1))
    if k == 1:
        return g
    idx = np.arange(0, g.m, k)
    breaks = tuple(b // k for b in g.breaks if b % k == 0)
    out = GridDensity(g.lo, g.lo + (idx.size - 1) * k * g.h, idx.size, g.logf[idx], breaks,
                      g.nonsmooth, g.gaussian, g.label)
    return normalize(out)


@dataclass(frozen=True)
class FlowState:
    """The law of X + Z_t."""

    base: Density
    t: float
    evolved: object


@dataclass(frozen=True)
class FlowCurve:
    states: tuple[FlowState, ...]

    def __post_init__(self):
        ts = [s.t for s in self.states]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("flow curve times must be strictly increasing")

    @property
    def times(self) -> list[float]:
        return [s.t for s in self.states]


def flow_curve(d: Density, times: Sequence[float], m: int = DEFAULT_M, tail_eps: float = DEFAULT_TAIL_EPS) -> FlowCurve:
    """States at each time, each evolved from the base directly (never chained)."""
    times = [float(t) for t in times]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError(f"times must be strictly increasing, got {times}")
    floor = T_MIN if d.nonsmooth else 0.0
    for t in times:
        if not t > 0 or t < floor:
            raise ValueError(f"time {t!r} outside the admissible range (> 0, >= {floor:g} for kinked bases)")
    states = []
    for t in times:
        try:
            states.append(FlowState(d, t, evolve(d, t, m, tail_eps)))
        except Exception as exc:
            raise FlowError(t, exc) from exc
    return FlowCurve(tuple(states))


def _key(t: float) -> float:
    return float(f"{t:.13g}")


class Flow:
    """Memoized heat flow of one base density.

    Stencils for derivatives in t revisit the same times many times;
    this caches evolved states and derived scalars by (rounded) time.
    """

    def __init__(self, base: Density, m: int = DEFAULT_M, tail_eps: float = DEFAULT_TAIL_EPS):
        self.base = base
        self.m = m
        self.tail_eps = tail_eps
        self._states: dict[float, object] = {}
        self.memo: dict[tuple, object] = {}

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def t_floor(self) -> float:
        return T_MIN if self.base.nonsmooth else 0.0

    def evolved(self, t: float):
        k = _key(t)
        if k not in self._states:
            try:
                self._states[k] = evolve(self.base, k, self.m, self.tail_eps)
            except Exception as exc:
                raise FlowError(k, exc) from exc
        return self._states[k]

    def state(self, t: float) -> FlowState:
        return FlowState(self.base, _key(t), self.evolved(t))

    def cached(self, name: str, t: float, fn):
        key = (name, _key(t))
        if key not in self.memo:
            self.memo[key] = fn(self.evolved(t))
        return self.memo[key]
