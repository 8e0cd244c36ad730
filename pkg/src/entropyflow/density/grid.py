"""Grid-sampled log-densities and the operations that build them."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

from ..errors import (
    DegenerateMass,
    GridFileError,
    NonpositiveScale,
    UnboundedTail,
    WeightMismatch,
)
from .families import FAMILIES, LOG_ZERO, AnalyticDensity

DEFAULT_M = 4096
DEFAULT_TAIL_EPS = 1e-12
MIN_NODES = 16
# nodes per side used by the Gregory end corrections
GREGORY_ORDER = 6


@lru_cache(maxsize=None)
def gregory_end_weights(p: int = GREGORY_ORDER) -> np.ndarray:
    """Corrections added to the first ``p`` trapezoid weights (in units of h).

    Obtained by matching the Euler-Maclaurin endpoint series with one-sided
    differences, which makes the corrected rule exact for polynomials of
    degree < p on each side of an endpoint.
    """
    bern = special.bernoulli(p + 1)
    nodes = np.arange(p, dtype=float)
    vander = np.vander(nodes, p, increasing=True).T
    rhs = np.array([bern[j + 1] / (j + 1) if j % 2 else 0.0 for j in range(p)])
    out = np.linalg.solve(vander, rhs)
    out.setflags(write=False)
    return out


def _exponents(e0: float, step: float, k: int) -> tuple[float, ...]:
    """First ``k`` distinct members of {e0 + j*step + l}, merging near-duplicates."""
    cand = sorted(e0 + j * step + l for j in range(k + 1) for l in range(k + 1))
    out: list[float] = []
    for e in cand:
        if not out or e - out[-1] > 0.05:
            out.append(e)
    return tuple(out[:k])


@lru_cache(maxsize=None)
def algebraic_end_weights(e0: float, step: float, p: int = GREGORY_ORDER) -> np.ndarray:
    """Weights (in units of h) for nodes 0..p at an edge where f ~ d^e0 (1 + ...).

    Generalized Euler-Maclaurin: h * sum_{j>=1} f(jh) exceeds the integral
    by sum_i c_i zeta(-e_i) h^(e_i + 1) when f = sum_i c_i d^e_i; the c_i
    are fitted from nodes 1..p. With integer exponents this reduces to the
    usual endpoint series.
    """
    exps = np.array(_exponents(e0, step, p))
    nodes = np.arange(1, p + 1, dtype=float)
    vander = nodes[:, None] ** exps[None, :]
    corr = -np.linalg.solve(vander.T, special.zeta(-exps))
    out = np.concatenate([[0.0], 1.0 + corr])
    out.setflags(write=False)
    return out


def _fractional(edge) -> bool:
    if edge is None:
        return False
    e0, step = edge
    return any(abs(e - round(e)) > 1e-12 for e in (e0, step))


def quadrature_weights(m: int, h: float, breaks: Sequence[int] = (), edges: tuple = (None, None)) -> np.ndarray:
    """Trapezoid weights with Gregory corrections at both ends and at breaks.

    A break is an interior node where the sampled function is smooth from
    each side but not across; each half is corrected as if it were an end.
    ``edges`` gives, per side, the algebraic edge behaviour ``(e0, step)``
    of a support boundary sitting on the end node; fractional powers get
    the generalized endpoint weights instead of Gregory's.
    """
    p = GREGORY_ORDER
    c = gregory_end_weights(p)
    w = np.full(m, h)
    w[0] = w[-1] = 0.5 * h
    left, right = edges
    if _fractional(left):
        w[:p + 1] = h * algebraic_end_weights(*left, p)
    else:
        w[:p] += h * c
    if _fractional(right):
        w[m - p - 1:] = h * algebraic_end_weights(*right, p)[::-1]
    else:
        w[m - p:] += h * c[::-1]
    for b in breaks:
        if p <= b <= m - 1 - p:
            w[b - p + 1:b + 1] += h * c[::-1]
            w[b:b + p] += h * c
    return w


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Natural-log density values on ``m`` uniformly spaced nodes of [lo, hi].

    ``breaks`` lists interior node indices where log f has a kink;
    ``nonsmooth`` marks grids whose derivative functionals are undefined
    until heat smoothing (kinks or support edges). ``gaussian`` is carried
    through operations that map Gaussians to Gaussians.
    """

    lo: float
    hi: float
    m: int
    logf: np.ndarray = field(repr=False)
    breaks: tuple[int, ...] = ()
    nonsmooth: bool = False
    gaussian: bool = False
    label: str = "grid"
    # algebraic support-edge behaviour at the end nodes, see quadrature_weights
    edges: tuple = (None, None)

    def __post_init__(self):
        logf = np.array(self.logf, dtype=float)
        if not self.hi > self.lo:
            raise ValueError(f"need hi > lo, got [{self.lo}, {self.hi}]")
        if self.m < MIN_NODES:
            raise ValueError(f"grid needs at least {MIN_NODES} nodes, got m={self.m}")
        if logf.shape != (self.m,):
            raise ValueError(f"logf has shape {logf.shape}, expected ({self.m},)")
        if not np.all(np.isfinite(logf)):
            raise ValueError("logf must be finite (use LOG_ZERO for zero density)")
        logf.setflags(write=False)
        object.__setattr__(self, "logf", logf)

    @property
    def n(self) -> int:
        return 1

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / (self.m - 1)

    @property
    def x(self) -> np.ndarray:
        return self.lo + self.h * np.arange(self.m)

    @property
    def weights(self) -> np.ndarray:
        return quadrature_weights(self.m, self.h, self.breaks, self.edges)

    @property
    def pdf(self) -> np.ndarray:
        return np.where(self.logf <= LOG_ZERO, 0.0, np.exp(self.logf))

    def log_mass(self) -> float:
        return float(special.logsumexp(self.logf, b=self.weights))

    def mass(self) -> float:
        return float(np.exp(self.log_mass()))

    def moment(self, k: int) -> float:
        return float(np.sum(self.weights * self.pdf * self.x**k))


@dataclass(frozen=True)
class ProductDensity:
    """Independent coordinates: the density is the product of its factors."""

    factors: tuple

    def __post_init__(self):
        if len(self.factors) < 1:
            raise ValueError("a product needs at least one factor")
        for f in self.factors:
            if isinstance(f, ProductDensity):
                raise ValueError("nested products are not supported; flatten the factors")

    @property
    def n(self) -> int:
        return len(self.factors)

    @property
    def gaussian(self) -> bool:
        return all(f.gaussian for f in self.factors)

    @property
    def nonsmooth(self) -> bool:
        return any(f.nonsmooth for f in self.factors)

    @property
    def label(self) -> str:
        return "product:" + "|".join(f.label for f in self.factors)


Density1D = Union[AnalyticDensity, GridDensity]
Density = Union[AnalyticDensity, GridDensity, ProductDensity]


def product(*factors: Density1D) -> ProductDensity:
    return ProductDensity(tuple(factors))


def normalize(g: GridDensity) -> GridDensity:
    """Shift ``logf`` by a constant so the quadrature mass is one."""
    with np.errstate(over="ignore"):
        lm = g.log_mass()
    if not math.isfinite(lm) or lm < math.log(1e-300):
        raise DegenerateMass(f"grid mass is degenerate (log mass {lm!r})")
    logf = np.where(g.logf <= LOG_ZERO, LOG_ZERO, g.logf - lm)
    return replace(g, logf=logf)


def window(d: AnalyticDensity, tail_eps: float = DEFAULT_TAIL_EPS) -> tuple[float, float]:
    """Interval holding all but ``tail_eps`` of the mass (``tail_eps/2`` per tail)."""
    dist = d.dist()
    s_lo, s_hi = d.support
    lo = s_lo if math.isfinite(s_lo) else float(dist.ppf(tail_eps / 2))
    hi = s_hi if math.isfinite(s_hi) else float(dist.isf(tail_eps / 2))
    mean, sd = float(dist.mean()), float(dist.std())
    for edge in (lo, hi):
        if not math.isfinite(edge) or abs(edge - mean) > 1e6 * sd:
            raise UnboundedTail(f"{d.label}: cannot certify tail mass {tail_eps:g} within 1e6 standard deviations")
    return lo, hi


def _aligned_nodes(d: AnalyticDensity, lo: float, hi: float, h: float) -> tuple[float, int, tuple[int, ...]]:
    kinks = [c for c in d.kinks if lo < c < hi]
    if kinks:
        # put the (first) kink exactly on a node
        c = kinks[0]
        lo = c - math.ceil((c - lo) / h - 1e-9) * h
    m = int(math.ceil((hi - lo) / h - 1e-9)) + 1
    breaks = tuple(int(round((c - lo) / h)) for c in kinks)
    return lo, m, breaks


def sample(d: AnalyticDensity, lo: float, h: float, m: int) -> np.ndarray:
    x = lo + h * np.arange(m)
    # exact support edges on nodes
    s_lo, s_hi = d.support
    if math.isfinite(s_lo):
        x[np.abs(x - s_lo) < 1e-9 * h] = s_lo
    if math.isfinite(s_hi):
        x[np.abs(x - s_hi) < 1e-9 * h] = s_hi
    return np.maximum(d.logpdf(x), LOG_ZERO)


def discretize(
    d: AnalyticDensity,
    m: int = DEFAULT_M,
    tail_eps: float = DEFAULT_TAIL_EPS,
    spacing: float | None = None,
) -> GridDensity:
    """Sample an analytic density on a window certified by tail quantiles.

    With ``spacing`` given, ``m`` is derived from the window instead.
    Interior kinks are aligned to nodes and recorded as breaks.
    """
    if spacing is None and m < MIN_NODES:
        raise ValueError(f"m must be >= {MIN_NODES}, got {m}")
    if not 0 < tail_eps <= 1e-10:
        raise ValueError(f"tail_eps must lie in (0, 1e-10], got {tail_eps!r}")
    lo, hi = window(d, tail_eps)
    h = spacing if spacing is not None else (hi - lo) / (m - 1)
    lo, m, breaks = _aligned_nodes(d, lo, hi, h)
    if m < MIN_NODES:
        raise ValueError(f"spacing {h!r} leaves fewer than {MIN_NODES} nodes")
    logf = sample(d, lo, h, m)
    g = GridDensity(lo, lo + (m - 1) * h, m, logf, breaks, d.nonsmooth, d.gaussian, d.label,
                    _edges_on_nodes(d, lo, h, m))
    return normalize(g)


def _edges_on_nodes(d: AnalyticDensity, lo: float, h: float, m: int) -> tuple:
    """Edge powers of the support boundaries that coincide with the end nodes."""
    s_lo, s_hi = d.support
    left, right = d.edge_powers
    hi = lo + (m - 1) * h
    return (left if math.isfinite(s_lo) and abs(lo - s_lo) < 1e-9 * h else None,
            right if math.isfinite(s_hi) and abs(hi - s_hi) < 1e-9 * h else None)


def to_grid(d: Density1D, m: int = DEFAULT_M, tail_eps: float = DEFAULT_TAIL_EPS, spacing: float | None = None) -> GridDensity:
    """Discretize analytic input; resample grid input only when a new spacing is asked for."""
    if isinstance(d, AnalyticDensity):
        return discretize(d, m, tail_eps, spacing)
    if spacing is None or math.isclose(spacing, d.h, rel_tol=1e-12):
        return d
    return resample(d, spacing)


def resample(g: GridDensity, spacing: float) -> GridDensity:
    """Cubic-spline resampling of ``logf`` onto a new spacing over the same window."""
    m = int(math.floor((g.hi - g.lo) / spacing + 1e-9)) + 1
    x = g.lo + spacing * np.arange(m)
    logf = np.maximum(CubicSpline(g.x, g.logf)(x), LOG_ZERO)
    return normalize(GridDensity(g.lo, float(x[-1]), m, logf, (), g.nonsmooth, g.gaussian, g.label))


def is_log_concave(d: Density, tol: float = 1e-8) -> tuple[bool, float, float]:
    """Check concavity of log f.

    Grids use centered second differences of ``logf`` divided by h^2;
    analytic densities use the closed-form second derivative on a dense
    probe grid over the discretization window. Returns the verdict, the
    largest second derivative found, and where it occurs.
    """
    if isinstance(d, ProductDensity):
        results = [is_log_concave(f, tol) for f in d.factors]
        worst = max(results, key=lambda r: r[1])
        return all(r[0] for r in results), worst[1], worst[2]
    if isinstance(d, GridDensity):
        lf = d.logf
        d2 = (lf[2:] - 2 * lf[1:-1] + lf[:-2]) / d.h**2
        i = int(np.argmax(d2))
        worst = float(d2[i])
        return worst <= tol, worst, float(d.x[i + 1])
    lo, hi = window(d)
    x = np.linspace(lo, hi, 20001)[1:-1]
    d2 = d.d2logpdf(x)
    ok = np.isfinite(d2)
    x, d2 = x[ok], d2[ok]
    i = int(np.argmax(d2))
    return bool(d2[i] <= tol), float(d2[i]), float(x[i])


def dilate(d: Density, a: float) -> Density:
    """Density of ``a X``."""
    if not a > 0:
        raise NonpositiveScale(f"dilation factor must be positive, got {a!r}")
    if isinstance(d, ProductDensity):
        return ProductDensity(tuple(dilate(f, a) for f in d.factors))
    if isinstance(d, AnalyticDensity):
        if a == 1:
            return d
        return AnalyticDensity.make(d.family, **d.fam.dilate(d.p, a))
    if a == 1:
        return d
    logf = np.where(d.logf <= LOG_ZERO, LOG_ZERO, d.logf - math.log(a))
    return replace(d, lo=d.lo * a, hi=d.hi * a, logf=logf, label=f"dilate({d.label},{a:g})")


def _grid_logpdf(g: GridDensity, x: np.ndarray) -> np.ndarray:
    out = np.full(x.shape, LOG_ZERO)
    inside = (x >= g.lo) & (x <= g.hi)
    out[inside] = CubicSpline(g.x, g.logf)(x[inside])
    return np.maximum(out, LOG_ZERO)


def mixture(
    ds: Sequence[Density1D],
    weights: Sequence[float],
    m: int = DEFAULT_M,
    tail_eps: float = DEFAULT_TAIL_EPS,
) -> GridDensity:
    """Weighted mixture sampled on the union of the component windows."""
    if len(ds) < 2 or len(ds) != len(weights):
        raise WeightMismatch("a mixture needs at least two components and one weight per component")
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
        raise WeightMismatch(f"mixture weights must be positive and sum to 1, got {list(weights)}")
    wins = [window(c, tail_eps) if isinstance(c, AnalyticDensity) else (c.lo, c.hi) for c in ds]
    lo, hi = min(a for a, _ in wins), max(b for _, b in wins)
    x = np.linspace(lo, hi, m)
    comps = [c.logpdf(x) if isinstance(c, AnalyticDensity) else _grid_logpdf(c, x) for c in ds]
    logf = np.maximum(special.logsumexp(np.vstack(comps), axis=0, b=w[:, None]), LOG_ZERO)
    label = "mix:" + "+".join(f"{wi:g}*{c.label}" for wi, c in zip(w, ds))
    return normalize(GridDensity(lo, hi, m, logf, (), any(c.nonsmooth for c in ds), False, label))


def read_grid_csv(path: str | Path) -> GridDensity:
    """Read a two-column ``x,logf`` CSV with a header row and uniform spacing."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise GridFileError(f"cannot read grid file {path}: {exc}") from exc
    if not rows or [c.strip() for c in rows[0]] != ["x", "logf"]:
        raise GridFileError(f"{path}: header row 'x,logf' required")
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    except ValueError as exc:
        raise GridFileError(f"{path}: malformed row ({exc})") from exc
    if data.shape[0] < MIN_NODES:
        raise GridFileError(f"{path}: need at least {MIN_NODES} rows")
    x, logf = data[:, 0], data[:, 1]
    dx = np.diff(x)
    h = (x[-1] - x[0]) / (x.size - 1)
    if h <= 0 or np.max(np.abs(dx - h)) > 1e-9 * abs(h):
        raise GridFileError(f"{path}: x spacing must be uniform within 1e-9 relative")
    g = GridDensity(float(x[0]), float(x[-1]), x.size, np.maximum(logf, LOG_ZERO), label=f"grid:file={path}")
    return normalize(g)


def write_grid_csv(g: GridDensity, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["x", "logf"])
        for xi, li in zip(g.x, g.logf):
            out.writerow([format(float(xi), ".17g"), format(float(li), ".17g")])


def family_names() -> list[str]:
    return list(FAMILIES)
