"""Signed slacks for the entropy and Fisher-information inequalities.

Every check returns an :class:`InequalityReport` whose slack is oriented
so that ``slack >= 0`` means the inequality holds at that lattice point.
Verdicts compare the worst slack with an error gate built from the
extrapolation error estimates plus an ``m^-2`` quadrature term.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .density import DEFAULT_M, DEFAULT_TAIL_EPS, Density, ProductDensity, is_log_concave, to_grid
from .errors import DimensionMismatch, NotLogConcave, NotLogConcaveWarning
from .flowcalc import d_dt, itilde_derivatives, n_derivatives
from .functionals import (
    DEFAULT_H,
    as_flow,
    cross_term,
    entropy_power,
    fisher,
    flow_value,
    j_functional,
    record,
)
from .heatflow import T_MIN, Flow, convolve, crop, evolve, thin, trim

CHECK_NAMES = (
    "epi",
    "blachman_stam",
    "costa_chord",
    "costa_concavity",
    "fisher_chord",
    "fisher_concavity",
    "third_derivative",
    "ine_main",
    "ine_m_lambda",
    "sharp2",
    "ineK",
    "ine_w",
    "dem_p",
    "iso",
    "isoF",
    "isoK",
)
VERDICTS = ("holds", "equality", "violated", "inconclusive")
GATE_SIGMAS = 3.0
GOLDEN_TOL = 1e-10


@dataclass(frozen=True)
class InequalityReport:
    """Slack curve of one inequality on one density (or pair) over a lattice.

    ``graded`` is False when a log-concave-only check ran on another
    density in explore mode: the verdict is then data, not pass/fail.
    """

    name: str
    density_spec: str
    t_lattice: tuple[float, ...]
    slacks: tuple[float, ...]
    min_slack: float
    argmin_t: float
    err_gate: float
    verdict: str
    graded: bool = True
    flags: tuple[str, ...] = ()
    lattice_name: str = "t"
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.slacks) != len(self.t_lattice):
            raise ValueError("one slack per lattice point is required")
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")

    @property
    def ok(self) -> bool:
        return not self.graded or self.verdict in ("holds", "equality")

    def to_dict(self) -> dict:
        return asdict(self)


def classify(min_slack: float, err_gate: float, gaussian: bool) -> str:
    """Verdict for a worst slack against its gate."""
    if gaussian and abs(min_slack) <= err_gate:
        return "equality"
    if min_slack < -3 * err_gate:
        return "violated"
    if min_slack < -err_gate:
        return "inconclusive"
    return "holds"


def _report(
    name: str,
    spec: str,
    lattice: Sequence[float],
    slacks: Sequence[float],
    gates: Sequence[float],
    gaussian: bool,
    graded: bool = True,
    flags: Iterable[str] = (),
    details: Optional[dict] = None,
    paths: Optional[Sequence[tuple[float, float]]] = None,
    lattice_name: str = "t",
) -> InequalityReport:
    slacks = [float(s) for s in slacks]
    details = dict(details or {})
    if slacks:
        i = int(np.argmin(slacks))
        lo, at = slacks[i], float(lattice[i])
        # the gate of the point that attains the minimum
        gate = float(gates[i])
        verdict = classify(lo, gate, gaussian)
    else:
        lo, at, gate, verdict = math.inf, math.nan, 0.0, "holds"
    if paths is not None and slacks:
        gaps = [abs(a - b) for a, b in paths]
        details["path_gap_max"] = max(gaps)
        # two evaluation paths disagreeing by more than the slack cannot certify a violation
        if verdict == "violated" and gaps[i] > abs(lo):
            verdict = "inconclusive"
            details["downgraded"] = "closed-form and differenced paths disagree"
    return InequalityReport(
        name, spec, tuple(float(t) for t in lattice), tuple(slacks), lo, at, gate, verdict,
        graded, tuple(flags), lattice_name, details,
    )


def _q(m: int) -> float:
    return 1.0 / m**2


def _log_concavity(flow: Flow, needed: bool, explore: bool) -> tuple[bool, tuple[str, ...]]:
    """Return (graded, flags); refuse non-log-concave input outside explore mode."""
    ok, worst, where = is_log_concave(flow.base, tol=1e-8)
    if ok:
        return True, ()
    if needed and not explore:
        raise NotLogConcave(
            f"{flow.base.label} is not log-concave (second derivative {worst:.3g} at x={where:.6g}); use explore mode"
        )
    warnings.warn(f"{flow.base.label} is not log-concave", NotLogConcaveWarning, stacklevel=3)
    return (not needed), ("NotLogConcave",)


def _chord_lattice(flow: Flow, lattice: Sequence[float]) -> tuple[float, list[float]]:
    t_lo = flow.t_floor
    pts = [t for t in lattice if t_lo <= t <= 1.0]
    if not pts:
        pts = list(np.linspace(t_lo, 1.0, 11))
    return t_lo, pts


def _chord(flow: Flow, lattice, value: Callable[[float], float]):
    t_lo, pts = _chord_lattice(flow, lattice)
    v_lo, v_1 = value(t_lo), value(1.0)
    slacks, gates = [], []
    q = _q(flow.m)
    for t in pts:
        lam = (t - t_lo) / (1.0 - t_lo)
        v = value(t)
        slacks.append(v - (1 - lam) * v_lo - lam * v_1)
        gates.append(GATE_SIGMAS * q * (abs(v) + abs(v_lo) + abs(v_1)))
    details = {"chord_endpoint": t_lo}
    flags = ("t_min_endpoint",) if t_lo > 0 else ()
    return pts, slacks, gates, details, flags


def _N(flow: Flow, t: float) -> float:
    return math.exp(2 * flow_value(flow, "H", t) / flow.n) / (2 * math.pi * math.e)


def _Itilde(flow: Flow, t: float) -> float:
    return flow.n / flow_value(flow, "I", t)


def check_costa(f, t_lattice: Sequence[float], h: float = DEFAULT_H, m: int = DEFAULT_M,
                tail_eps: float = DEFAULT_TAIL_EPS, explore: bool = False):
    """Concavity of the entropy power along the flow: chord and second-derivative forms.

    The chord uses the endpoints t_lo and 1, with t_lo = 0 for smooth bases
    and t_min for kinked ones. This does not require log-concavity.
    """
    flow = as_flow(f, m, tail_eps)
    spec, gauss = flow.base.label, flow.base.gaussian
    _, flags = _log_concavity(flow, needed=False, explore=explore)
    pts, slacks, gates, details, cflags = _chord(flow, t_lattice, lambda t: _N(flow, t))
    chord = _report("costa_chord", spec, pts, slacks, gates, gauss, True, flags + cflags, details)
    nds = [n_derivatives(flow, t, h) for t in t_lattice]
    conc = _report(
        "costa_concavity", spec, t_lattice, [-d.d2 for d in nds], [GATE_SIGMAS * d.err[1] for d in nds],
        gauss, True, flags, paths=[(d.d2, d.direct[1].value) for d in nds],
    )
    return chord, conc


def check_fisher_concavity(f, t_lattice: Sequence[float], h: float = DEFAULT_H, m: int = DEFAULT_M,
                           tail_eps: float = DEFAULT_TAIL_EPS, explore: bool = False):
    """Concavity of n/I along the flow: chord and second-derivative forms."""
    flow = as_flow(f, m, tail_eps)
    spec, gauss = flow.base.label, flow.base.gaussian
    graded, flags = _log_concavity(flow, needed=True, explore=explore)
    pts, slacks, gates, details, cflags = _chord(flow, t_lattice, lambda t: _Itilde(flow, t))
    chord = _report("fisher_chord", spec, pts, slacks, gates, gauss, graded, flags + cflags, details)
    its = [itilde_derivatives(flow, t, h) for t in t_lattice]
    conc = _report(
        "fisher_concavity", spec, t_lattice, [-d.d2 for d in its], [GATE_SIGMAS * d.err[1] for d in its],
        gauss, graded, flags, paths=[(d.d2, d.direct[1].value) for d in its],
    )
    return chord, conc


def sign_certificate(p: float) -> float:
    """2p^2 - 3p + 1 = (2p - 1)(p - 1), nonnegative for p >= 1."""
    return 2 * p * p - 3 * p + 1


def check_third_derivative(f, t_lattice: Sequence[float], h: float = DEFAULT_H, m: int = DEFAULT_M,
                           tail_eps: float = DEFAULT_TAIL_EPS, explore: bool = False) -> InequalityReport:
    """Nonnegativity of the third t-derivative of the entropy power."""
    flow = as_flow(f, m, tail_eps)
    graded, flags = _log_concavity(flow, needed=True, explore=explore)
    nds = [n_derivatives(flow, t, h) for t in t_lattice]
    ps = [d.record.p for d in nds]
    details = {"p": ps, "certificate": [sign_certificate(p) for p in ps]}
    return _report(
        "third_derivative", flow.base.label, t_lattice, [d.d3 for d in nds],
        [GATE_SIGMAS * d.err[2] for d in nds], flow.base.gaussian, graded, flags, details,
        paths=[(d.d3, d.direct[2].value) for d in nds],
    )


def check_ineK(f, t_lattice: Sequence[float], h: float = DEFAULT_H, m: int = DEFAULT_M,
               tail_eps: float = DEFAULT_TAIL_EPS, explore: bool = False):
    """K >= 2J^2/I (strong) and K >= 2J^{3/2}/sqrt(n) (weak).

    The strong bound dominates the weak one exactly when nJ >= I^2; that
    dominance is recorded in the strong report's details.
    """
    flow = as_flow(f, m, tail_eps)
    spec, gauss = flow.base.label, flow.base.gaussian
    graded, flags = _log_concavity(flow, needed=True, explore=explore)
    q = _q(flow.m)
    strong, weak, gs, gw, dom, paths = [], [], [], [], [], []
    for t in t_lattice:
        r = record(flow, t, h)
        if r.K is None:
            raise ValueError(f"K unavailable at t={t:g} with h={h:g}")
        rs = 2 * r.J**2 / r.I
        rw = 2 * r.J**1.5 / math.sqrt(r.n)
        strong.append(r.K - rs)
        weak.append(r.K - rw)
        gs.append(GATE_SIGMAS * (r.K_err + q * (abs(r.K) + rs)))
        gw.append(GATE_SIGMAS * (r.K_err + q * (abs(r.K) + rw)))
        dom.append(rs - rw)
        # independent path: K is also the second t-derivative of I
        paths.append((r.K, d_dt(lambda s: flow_value(flow, "I", s), t, 2, h, flow.t_floor).value))
    details = {"dominance": dom, "dominance_min": min(dom) if dom else math.inf,
               "dominance_ok": all(d >= -g for d, g in zip(dom, gs))}
    return (
        _report("ineK", spec, t_lattice, strong, gs, gauss, graded, flags, details, paths),
        _report("ine_w", spec, t_lattice, weak, gw, gauss, graded, flags, paths=paths),
    )


def check_dem(f, t_lattice: Sequence[float], h: float = DEFAULT_H, m: int = DEFAULT_M,
              tail_eps: float = DEFAULT_TAIL_EPS, explore: bool = False) -> InequalityReport:
    """p - 1 = (nJ - I^2)/I^2 along the flow."""
    flow = as_flow(f, m, tail_eps)
    graded, flags = _log_concavity(flow, needed=False, explore=explore)
    ps = [record(flow, t, h).p for t in t_lattice]
    q = _q(flow.m)
    return _report("dem_p", flow.base.label, t_lattice, [p - 1 for p in ps],
                   [GATE_SIGMAS * q * 3 * p for p in ps], flow.base.gaussian, graded, flags)


def check_iso_family(f, t_lattice: Sequence[float], h: float = DEFAULT_H, m: int = DEFAULT_M,
                     tail_eps: float = DEFAULT_TAIL_EPS, explore: bool = False):
    """N I/n >= 1, nJ/I^2 >= 1 and K >= 2J^2/I along the flow.

    The isoF report also records whether nJ/I^2 is non-increasing in t.
    """
    flow = as_flow(f, m, tail_eps)
    spec, gauss = flow.base.label, flow.base.gaussian
    graded_k, flags = _log_concavity(flow, needed=True, explore=explore)
    q = _q(flow.m)
    recs = [record(flow, t, h) for t in t_lattice]
    iso = [r.N * r.I / r.n - 1 for r in recs]
    isoF = [r.p - 1 for r in recs]
    g_iso = [GATE_SIGMAS * q * 2 * (s + 1) for s in iso]
    g_isoF = [GATE_SIGMAS * q * 3 * (s + 1) for s in isoF]
    iso_k, g_k = [], []
    for r in recs:
        if r.K is None:
            raise ValueError(f"K unavailable at t={r.t:g} with h={h:g}")
        rhs = 2 * r.J**2 / r.I
        iso_k.append(r.K - rhs)
        g_k.append(GATE_SIGMAS * (r.K_err + q * (abs(r.K) + rhs)))
    rises = [b - a for a, b in zip(isoF, isoF[1:])]
    gate_f = max(g_isoF) if g_isoF else 0.0
    mono = {"p": [s + 1 for s in isoF], "p_max_increase": max(rises) if rises else -math.inf}
    mono["p_monotone"] = mono["p_max_increase"] <= gate_f
    return (
        _report("iso", spec, t_lattice, iso, g_iso, gauss, True, flags),
        _report("isoF", spec, t_lattice, isoF, g_isoF, gauss, True, flags, mono),
        _report("isoK", spec, t_lattice, iso_k, g_k, gauss, graded_k, flags),
    )


def golden_section(fn: Callable[[float], float], a: float, b: float, tol: float = GOLDEN_TOL) -> float:
    """Minimizer of a unimodal ``fn`` on [a, b], to within ``tol``."""
    invphi = (math.sqrt(5) - 1) / 2
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def _lambda(alpha, J: float, I: float, n: int, t: float):
    a = np.asarray(alpha, dtype=float)
    return a**4 * J + (1 - a) ** 4 * n / t**2 + 2 * a**2 * (1 - a) ** 2 * I / t


def _smooth_time(flow: Flow, smooth: Optional[float]) -> float:
    return flow.t_floor if smooth is None else float(smooth)


def _base_IJ(flow: Flow, s0: float) -> tuple[float, float]:
    return flow_value(flow, "I", s0), flow_value(flow, "J", s0)


def lambda_of_alpha(f, t: float, alpha, smooth: Optional[float] = None, m: int = DEFAULT_M,
                    tail_eps: float = DEFAULT_TAIL_EPS):
    """Upper bound on J(X + Z_t) as a function of the splitting weight alpha.

    X is the base smoothed to time ``smooth`` (t_min for kinked bases).
    """
    flow = as_flow(f, m, tail_eps)
    I, J = _base_IJ(flow, _smooth_time(flow, smooth))
    out = _lambda(alpha, J, I, flow.n, t)
    return float(out) if np.ndim(out) == 0 else out


def optimal_alpha(f, t: float, smooth: Optional[float] = None, m: int = DEFAULT_M,
                  tail_eps: float = DEFAULT_TAIL_EPS) -> tuple[float, float]:
    """Minimizer of the alpha bound and its distance from 1 - (J/I) t."""
    flow = as_flow(f, m, tail_eps)
    I, J = _base_IJ(flow, _smooth_time(flow, smooth))
    abar = golden_section(lambda a: float(_lambda(a, J, I, flow.n, t)), 0.0, 1.0)
    return abar, abs(abar - (1 - J / I * t))


def check_ine_m(f, t: float, alpha_grid: Optional[Sequence[float]] = None, smooth: Optional[float] = None,
                m: int = DEFAULT_M, tail_eps: float = DEFAULT_TAIL_EPS, explore: bool = False) -> InequalityReport:
    """Lambda(alpha) - J(X + Z_t) over an alpha grid, plus the convexity of Lambda.

    The minimizer found by golden-section search is added to the grid so
    the Gaussian equality case is hit exactly.
    """
    flow = as_flow(f, m, tail_eps)
    graded, flags = _log_concavity(flow, needed=True, explore=explore)
    s0 = _smooth_time(flow, smooth)
    I, J = _base_IJ(flow, s0)
    if alpha_grid is None:
        alpha_grid = np.linspace(0.0, 1.0, 101)
    grid = np.asarray(alpha_grid, dtype=float)
    lam = _lambda(grid, J, I, flow.n, t)
    second = lam[2:] - 2 * lam[1:-1] + lam[:-2]
    half = float(_lambda(0.5, J, I, flow.n, t))
    abar, _ = optimal_alpha(flow, t, s0)
    alphas = np.unique(np.append(grid, abar))
    lam_all = _lambda(alphas, J, I, flow.n, t)
    Jt = flow_value(flow, "J", s0 + t)
    q = _q(flow.m)
    details = {
        "t": t,
        "smooth": s0,
        "alpha_bar": abar,
        "convexity_min": float(second.min()) if second.size else math.inf,
        "convexity_ok": bool(second.size == 0 or second.min() >= -1e-8 * half),
    }
    return _report(
        "ine_m_lambda", flow.base.label, alphas, lam_all - Jt, GATE_SIGMAS * q * (np.abs(lam_all) + Jt),
        flow.base.gaussian, graded, flags, details, lattice_name="alpha",
    )


# pairs of independent summands


def _factors(d):
    return d.factors if isinstance(d, ProductDensity) else (d,)


def _pack(parts):
    return parts[0] if len(parts) == 1 else ProductDensity(tuple(parts))


def smoothed_pair(f: Density, g: Density, s: float, m: int = DEFAULT_M, tail_eps: float = DEFAULT_TAIL_EPS):
    """X + Z_s, Y + Z_s and their sum, all on one node spacing per coordinate."""
    if f.n != g.n:
        raise DimensionMismatch(f"dimensions differ: {f.n} vs {g.n}")
    xs, ys, ss = [], [], []
    for a, b in zip(_factors(f), _factors(g)):
        h = min(to_grid(a, m, tail_eps).h, to_grid(b, m, tail_eps).h)
        A, B = evolve(a, s, m, tail_eps, h), evolve(b, s, m, tail_eps, h)
        # each summand is widened by the other's width so the sum is free
        # of truncation artefacts on the window it is cropped to
        # (nodes far below the peak cannot reach the functionals' floor)
        wide_a = trim(evolve(a, s, m, tail_eps, h, margin=B.hi - B.lo))
        wide_b = trim(evolve(b, s, m, tail_eps, h, margin=A.hi - A.lo))
        total = crop(convolve(wide_a, wide_b), A.lo + B.lo, A.hi + B.hi)
        xs.append(thin(A, m))
        ys.append(thin(B, m))
        ss.append(thin(total, m))
    return _pack(xs), _pack(ys), _pack(ss)


def _pair_times(f, g, smooth_times) -> list[float]:
    if smooth_times is not None:
        return [float(s) for s in smooth_times]
    return [T_MIN if (f.nonsmooth or g.nonsmooth) else 0.0]


def _pair_spec(f, g) -> str:
    return f"{f.label} & {g.label}"


def _pair_lc(f, g, explore: bool) -> tuple[bool, tuple[str, ...]]:
    ok = is_log_concave(f)[0] and is_log_concave(g)[0]
    if ok:
        return True, ()
    if not explore:
        raise NotLogConcave(f"{_pair_spec(f, g)}: a summand is not log-concave; use explore mode")
    warnings.warn(f"{_pair_spec(f, g)}: a summand is not log-concave", NotLogConcaveWarning, stacklevel=3)
    return False, ("NotLogConcave",)


def _pair_check(name, f, g, smooth_times, m, tail_eps, value, needs_lc, explore):
    graded, flags = _pair_lc(f, g, explore) if needs_lc else (True, ())
    q = _q(m)
    times = _pair_times(f, g, smooth_times)
    slacks, gates = [], []
    for s in times:
        X, Y, S = smoothed_pair(f, g, s, m, tail_eps)
        vx, vy, vs = value(X), value(Y), value(S)
        slacks.append(vs - vx - vy)
        gates.append(GATE_SIGMAS * q * (abs(vx) + abs(vy) + abs(vs)))
    return _report(name, _pair_spec(f, g), times, slacks, gates, f.gaussian and g.gaussian, graded, flags,
                   lattice_name="smooth_t")


def check_epi(f: Density, g: Density, smooth_times: Optional[Sequence[float]] = None, m: int = DEFAULT_M,
              tail_eps: float = DEFAULT_TAIL_EPS, explore: bool = False) -> InequalityReport:
    """N(X + Y) - N(X) - N(Y) at each smoothing time."""
    return _pair_check("epi", f, g, smooth_times, m, tail_eps, entropy_power, False, explore)


def check_blachman_stam(f: Density, g: Density, smooth_times: Optional[Sequence[float]] = None,
                        m: int = DEFAULT_M, tail_eps: float = DEFAULT_TAIL_EPS, explore: bool = False) -> InequalityReport:
    """n/I(X + Y) - n/I(X) - n/I(Y) at each smoothing time."""
    return _pair_check("blachman_stam", f, g, smooth_times, m, tail_eps, lambda d: d.n / fisher(d), False, explore)


def check_sharp2(f: Density, g: Density, smooth_times: Optional[Sequence[float]] = None, m: int = DEFAULT_M,
                 tail_eps: float = DEFAULT_TAIL_EPS, explore: bool = False) -> InequalityReport:
    """J(X + Y)^{-1/2} - J(X)^{-1/2} - J(Y)^{-1/2} at each smoothing time."""
    return _pair_check("sharp2", f, g, smooth_times, m, tail_eps, lambda d: j_functional(d) ** -0.5, True, explore)


def check_ine_main(f: Density, g: Density, alpha_grid: Optional[Sequence[float]] = None,
                   smooth: Optional[float] = None, m: int = DEFAULT_M, tail_eps: float = DEFAULT_TAIL_EPS,
                   explore: bool = False) -> InequalityReport:
    """alpha^4 J(X) + (1-alpha)^4 J(Y) + 2 alpha^2 (1-alpha)^2 H(X,Y) - J(X + Y) over alpha."""
    graded, flags = _pair_lc(f, g, explore)
    s = _pair_times(f, g, None if smooth is None else [smooth])[0]
    X, Y, S = smoothed_pair(f, g, s, m, tail_eps)
    jx, jy, js, hxy = j_functional(X), j_functional(Y), j_functional(S), cross_term(X, Y)

    def bound(a):
        a = np.asarray(a, dtype=float)
        return a**4 * jx + (1 - a) ** 4 * jy + 2 * a**2 * (1 - a) ** 2 * hxy

    grid = np.linspace(0.0, 1.0, 101) if alpha_grid is None else np.asarray(alpha_grid, dtype=float)
    abar = golden_section(lambda a: float(bound(a)), 0.0, 1.0)
    alphas = np.unique(np.append(grid, abar))
    b = bound(alphas)
    q = _q(m)
    return _report("ine_main", _pair_spec(f, g), alphas, b - js, GATE_SIGMAS * q * (np.abs(b) + js),
                   f.gaussian and g.gaussian, graded, flags, {"smooth": s, "alpha_bar": abar},
                   lattice_name="alpha")


def check_ine_m_curve(f, t_lattice: Sequence[float], alpha_grid: Optional[Sequence[float]] = None,
                      smooth: Optional[float] = None, m: int = DEFAULT_M, tail_eps: float = DEFAULT_TAIL_EPS,
                      explore: bool = False) -> InequalityReport:
    """:func:`check_ine_m` over a t lattice: the worst alpha slack at each t.

    The convexity of Lambda is required at every t for ``convexity_ok``.
    """
    flow = as_flow(f, m, tail_eps)
    reps = [check_ine_m(flow, t, alpha_grid, smooth, explore=explore) for t in t_lattice]
    details = {
        "alpha_bar": [r.details["alpha_bar"] for r in reps],
        "convexity_ok": all(r.details["convexity_ok"] for r in reps),
        "convexity_min": min((r.details["convexity_min"] for r in reps), default=math.inf),
    }
    graded = all(r.graded for r in reps)
    flags = reps[0].flags if reps else ()
    return _report("ine_m_lambda", flow.base.label, t_lattice, [r.min_slack for r in reps],
                   [r.err_gate for r in reps], flow.base.gaussian, graded, flags, details)
