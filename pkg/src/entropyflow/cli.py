"""Command-line front end: ``eval``, ``sweep``, ``verify`` and ``families``.

Exit codes: 0 success; 1 a violated check or failed sweep row; 2 usage or
specification error; 3 numerical failure; 4 inconclusive checks only.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from . import inequalities as ineq
from .density import DEFAULT_M, DEFAULT_TAIL_EPS, FAMILIES, parse_density
from .errors import EntropyFlowError, NotLogConcaveWarning, SpecError
from .functionals import DEFAULT_H, flow_value, record
from .heatflow import T_MIN, Flow

EXIT_OK, EXIT_VIOLATED, EXIT_USAGE, EXIT_NUMERICAL, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4

CURVE_COLUMNS = ("t", "H", "N", "I", "I_tilde", "J", "K", "p", "dN1", "dN2", "dN3", "dI1", "dI2")
PAIR_CHECKS = ("epi", "blachman_stam", "sharp2", "ine_main")
DEFAULT_SUITE = (
    "gaussian:mu=0,sigma2=1",
    "logistic:scale=1",
    "gumbel:scale=1",
    "gamma:shape=2,scale=1",
    "weibull:shape=2,scale=1",
)


class UsageError(Exception):
    pass


def fmt(x) -> str:
    """Fixed 17-significant-digit formatting; empty for missing values."""
    if x is None:
        return ""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class SweepConfig:
    density_specs: tuple[str, ...] = DEFAULT_SUITE
    t_start: float = 0.1
    t_end: float = 2.0
    points: int = 20
    spacing: str = "linear"
    h: float = DEFAULT_H
    m: int = DEFAULT_M
    tail_eps: float = DEFAULT_TAIL_EPS
    checks: tuple[str, ...] = ineq.CHECK_NAMES
    explore: bool = False
    format: str = "csv"
    path: Optional[str] = None

    def validate(self, densities: Sequence) -> None:
        if not self.density_specs:
            raise UsageError("at least one density spec is required")
        if self.points < 2:
            raise UsageError(f"points must be >= 2, got {self.points}")
        if not self.t_end > self.t_start:
            raise UsageError(f"t_end must exceed t_start ({self.t_start} .. {self.t_end})")
        if self.spacing not in ("linear", "log"):
            raise UsageError(f"spacing must be linear or log, got {self.spacing!r}")
        if self.spacing == "log" and not self.t_start > 0:
            raise UsageError("log spacing needs t_start > 0")
        if self.t_start < 0:
            raise UsageError("t_start must be nonnegative")
        if any(d.nonsmooth for d in densities) and self.t_start < T_MIN:
            raise UsageError(f"t_start must be >= t_min = {T_MIN:g} when a density is kinked")
        if not self.checks:
            raise UsageError("checks must be nonempty")
        unknown = set(self.checks) - set(ineq.CHECK_NAMES)
        if unknown:
            raise UsageError(f"unknown checks: {', '.join(sorted(unknown))}")
        if self.format not in ("csv", "json"):
            raise UsageError(f"format must be csv or json, got {self.format!r}")

    def lattice(self) -> list[float]:
        if self.spacing == "log":
            ts = np.geomspace(self.t_start, self.t_end, self.points)
        else:
            ts = np.linspace(self.t_start, self.t_end, self.points)
        return [float(t) for t in ts]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["density_specs"] = list(self.density_specs)
        d["checks"] = list(self.checks)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_json(cls, path: str | Path) -> "SweepConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        raw = dict(raw)
        lat = raw.pop("t_lattice", {}) or {}
        out = raw.pop("output", {}) or {}
        merged = {**raw, **lat, **out}
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(merged) - known
        if extra:
            raise UsageError(f"unknown config keys: {', '.join(sorted(extra))}")
        for key in ("density_specs", "checks"):
            if key in merged:
                merged[key] = tuple(merged[key])
        return cls(**merged)


@dataclass(frozen=True)
class RunManifest:
    config_hash: str
    tool_version: str
    timestamp: str
    per_check_summaries: list = field(default_factory=list)

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.stem + ".manifest.json")


# eval and sweep


def curve_row(flow: Flow, t: float, h: float) -> dict:
    """Functionals and closed-form flow derivatives at one time.

    Fields that need K are None when its stencil does not fit. Failures
    are re-raised with the name of the failing functional attached.
    """
    for name in ("H", "I", "J"):
        try:
            flow_value(flow, name, t)
        except EntropyFlowError as exc:
            raise FunctionalFailure(name, exc) from exc
    try:
        r = record(flow, t, h)
    except EntropyFlowError as exc:
        raise FunctionalFailure("K", exc) from exc
    n, N, I, J, K = r.n, r.N, r.I, r.J, r.K
    row = {"t": r.t, "H": r.H, "N": N, "I": I, "I_tilde": r.I_tilde, "J": J, "K": K, "p": r.p}
    row["dN1"] = N * I / n
    row["dN2"] = (N / n) * (I * I / n - J)
    row["dN3"] = None if K is None else (N / n) * (K + I**3 / n**2 - 3 * I * J / n)
    row["dI1"] = n * J / I**2
    row["dI2"] = None if K is None else n * (2 * J * J / I**3 - K / I**2)
    return row


class FunctionalFailure(Exception):
    def __init__(self, functional: str, cause: Exception):
        super().__init__(f"{functional} failed: {type(cause).__name__}: {cause}")
        self.functional = functional
        self.cause = cause


def _rows_csv(rows: list[dict], lead: Sequence[str] = (), tail: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = list(lead) + list(CURVE_COLUMNS) + list(tail)
    w.writerow(cols)
    for r in rows:
        w.writerow([r.get(c, "") if c in lead or c in tail else fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def _rows_json(rows: list[dict]) -> str:
    return json.dumps(rows, indent=2, default=_json_default) + "\n"


def cmd_eval(args) -> int:
    try:
        d = parse_density(args.spec, args.m, args.tail_eps)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.t is None or args.t < 0:
        print("error: --t must be given and nonnegative", file=sys.stderr)
        return EXIT_USAGE
    flow = Flow(d, args.m, args.tail_eps)
    try:
        row = curve_row(flow, args.t, args.h)
    except FunctionalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except EntropyFlowError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    text = _rows_json([row]) if args.format == "json" else _rows_csv([row])
    _emit(text, args.out)
    return EXIT_OK


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_config(args) -> SweepConfig:
    cfg = SweepConfig.from_json(args.config) if args.config else SweepConfig()
    over = {}
    if args.specs:
        over["density_specs"] = tuple(args.specs)
    for key in ("t_start", "t_end", "points", "spacing", "h", "m", "tail_eps", "format"):
        v = getattr(args, key, None)
        if v is not None:
            over[key] = v
    if getattr(args, "checks", None):
        over["checks"] = tuple(c.strip() for c in args.checks.split(",") if c.strip())
    if getattr(args, "explore", False):
        over["explore"] = True
    if args.out is not None:
        over["path"] = args.out
    return dataclasses.replace(cfg, **over)


def _parse_all(cfg: SweepConfig):
    return [parse_density(s, cfg.m, cfg.tail_eps) for s in cfg.density_specs]


def cmd_sweep(args) -> int:
    try:
        cfg = _load_config(args)
        densities = _parse_all(cfg)
        cfg.validate(densities)
    except (UsageError, SpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(cfg.path or f"sweep.{cfg.format}")
    rows, summaries, failed = [], [], False
    for spec, d in zip(cfg.density_specs, densities):
        flow = Flow(d, cfg.m, cfg.tail_eps)
        bad = 0
        for t in cfg.lattice():
            try:
                row = curve_row(flow, t, cfg.h)
                row.update(density=spec, status="ok")
            except (FunctionalFailure, EntropyFlowError) as exc:
                row = {"density": spec, "t": t, "status": f"error: {exc}"}
                bad += 1
            rows.append(row)
        failed |= bad > 0
        summaries.append({"name": "sweep", "density": spec, "verdict": "failed" if bad else "ok",
                          "min_slack": None, "argmin_t": None, "failed_rows": bad})
    text = _rows_json(rows) if cfg.format == "json" else _rows_csv(rows, lead=("density",), tail=("status",))
    out.write_text(text)
    RunManifest(cfg.config_hash(), __version__, _now(), summaries).write(_manifest_path(out))
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_VIOLATED if failed else EXIT_OK


# verify


def _tuple(x):
    return x if isinstance(x, tuple) else (x,)


# check groups computed together on one flow
SINGLE_GROUPS: tuple[tuple[tuple[str, ...], Callable], ...] = (
    (("costa_chord", "costa_concavity"), ineq.check_costa),
    (("fisher_chord", "fisher_concavity"), ineq.check_fisher_concavity),
    (("third_derivative",), ineq.check_third_derivative),
    (("ineK", "ine_w"), ineq.check_ineK),
    (("iso", "isoF", "isoK"), ineq.check_iso_family),
    (("dem_p",), ineq.check_dem),
    (("ine_m_lambda",), lambda f, lattice, h, explore: ineq.check_ine_m_curve(f, lattice, explore=explore)),
)

# checks whose verdict does not depend on log-concavity of the input
LC_FREE = frozenset({"costa_chord", "costa_concavity", "dem_p", "iso", "isoF", "epi", "blachman_stam"})

_PAIR_FUNCS = {
    "epi": ineq.check_epi,
    "blachman_stam": ineq.check_blachman_stam,
    "sharp2": ineq.check_sharp2,
    "ine_main": ineq.check_ine_main,
}


def _error_summary(name: str, spec: str, exc: Exception) -> dict:
    return {"name": name, "density": spec, "verdict": "error", "min_slack": None, "argmin_t": None,
            "error": f"{type(exc).__name__}: {exc}"}


def _refine(rep, rerun: Callable[[], list]):
    """Re-run a violated check on a finer grid and report the refined result."""
    if rep.verdict != "violated" or not rep.graded:
        return rep
    try:
        again = next(r for r in rerun() if r.name == rep.name)
    except (EntropyFlowError, ValueError) as exc:
        return dataclasses.replace(rep, details={**rep.details, "refinement_error": str(exc)})
    details = {**again.details, "refined": True, "first_verdict": rep.verdict, "first_min_slack": rep.min_slack}
    return dataclasses.replace(again, details=details)


def run_verify(cfg: SweepConfig, densities) -> tuple[list, list[dict]]:
    """Run every configured check; returns (reports, error summaries).

    Single-density checks run on each spec, pair checks on every pair i <= j.
    A violated verdict is re-examined with twice the nodes and half the step
    before it is reported. Reports are ordered by check name, then spec.
    """
    lattice = cfg.lattice()
    wanted = set(cfg.checks)
    reports, errors = [], []
    for spec, d in zip(cfg.density_specs, densities):
        flow = Flow(d, cfg.m, cfg.tail_eps)
        for names, fn in SINGLE_GROUPS:
            names = tuple(n for n in names if n in wanted)
            if not names:
                continue

            # a group asked only for checks without the hypothesis must not refuse the input
            explore = cfg.explore or set(names) <= LC_FREE

            def run(flow, h, fn=fn, spec=spec, explore=explore):
                got = _tuple(fn(flow, lattice, h, explore=explore))
                return [dataclasses.replace(r, density_spec=spec) for r in got]

            try:
                got = run(flow, cfg.h)
            except (EntropyFlowError, ValueError) as exc:
                errors.extend(_error_summary(n, spec, exc) for n in names)
                continue
            fine = lambda run=run, d=d: run(Flow(d, 2 * cfg.m, cfg.tail_eps), cfg.h / 2)  # noqa: E731
            reports.extend(_refine(r, fine) for r in got if r.name in names)
    pairs = [(i, j) for i in range(len(densities)) for j in range(i, len(densities))]
    for name in (n for n in PAIR_CHECKS if n in wanted):
        fn = _PAIR_FUNCS[name]
        for i, j in pairs:
            spec = f"{cfg.density_specs[i]} & {cfg.density_specs[j]}"

            def run(m, fn=fn, f=densities[i], g=densities[j], spec=spec):
                rep = fn(f, g, m=m, tail_eps=cfg.tail_eps, explore=cfg.explore)
                return [dataclasses.replace(rep, density_spec=spec)]

            try:
                rep = run(cfg.m)[0]
            except (EntropyFlowError, ValueError) as exc:
                errors.append(_error_summary(name, spec, exc))
                continue
            reports.append(_refine(rep, lambda run=run: run(2 * cfg.m)))
    reports.sort(key=lambda r: (r.name, r.density_spec))
    return reports, errors


def exit_code_for(reports, errors=()) -> int:
    """Exit status for a set of reports: violated beats errors beats inconclusive."""
    graded = [r for r in reports if r.graded]
    if any(r.verdict == "violated" for r in graded):
        return EXIT_VIOLATED
    if errors:
        return EXIT_NUMERICAL
    if any(r.verdict == "inconclusive" for r in graded):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        cfg = _load_config(args)
        if cfg.format == "csv" and args.format is None:
            cfg = dataclasses.replace(cfg, format="json")
        densities = _parse_all(cfg)
        cfg.validate(densities)
    except (UsageError, SpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotLogConcaveWarning)
        reports, errors = run_verify(cfg, densities)
    out = Path(cfg.path or f"verify.{cfg.format}")
    if cfg.format == "json":
        out.write_text(json.dumps([r.to_dict() for r in reports], indent=2, default=_json_default) + "\n")
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "density", "verdict", "graded", "min_slack", "argmin_t", "err_gate"])
        for r in reports:
            w.writerow([r.name, r.density_spec, r.verdict, r.graded, fmt(r.min_slack), fmt(r.argmin_t), fmt(r.err_gate)])
        out.write_text(buf.getvalue())
    summaries = [
        {"name": r.name, "density": r.density_spec, "verdict": r.verdict, "graded": r.graded,
         "min_slack": r.min_slack, "argmin_t": r.argmin_t}
        for r in reports
    ] + errors
    summaries.sort(key=lambda s: (s["name"], s["density"]))
    RunManifest(cfg.config_hash(), __version__, _now(), summaries).write(_manifest_path(out))
    for s in summaries:
        tag = s["verdict"] if s.get("graded", True) else f"{s['verdict']} (ungraded)"
        slack = "" if s["min_slack"] is None else f" min_slack={fmt(s['min_slack'])}"
        slack += f" ({s['error']})" if "error" in s else ""
        print(f"{s['name']:18s} {s['density']:50s} {tag}{slack}")
    code = exit_code_for(reports, errors)
    print(f"exit {code}")
    return code


def cmd_families(args) -> int:
    for name, fam in FAMILIES.items():
        params = ", ".join(f"{k}={v:g}" for k, v in fam.keys.items())
        smooth = f"kinked (t >= t_min = {T_MIN:g} required for J, K)" if fam.kinked else "smooth"
        print(f"{name:12s} defaults: {params:28s} constraints: {fam.constraints:42s} {smooth}")
    print("combinators:")
    print("  product:spec1|spec2|...    independent coordinates (n = number of factors)")
    print("  mix:w1*spec1+w2*spec2      mixture sampled on a grid (weights sum to 1)")
    print("  grid:file=PATH             two-column x,logf CSV with header, uniform spacing")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="entropyflow", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def grid_flags(sp, defaults: bool):
        sp.add_argument("--h", type=float, default=DEFAULT_H if defaults else None, help="t-differencing step")
        sp.add_argument("--m", type=int, default=DEFAULT_M if defaults else None, help="grid nodes")
        sp.add_argument("--tail-eps", dest="tail_eps", type=float, default=DEFAULT_TAIL_EPS if defaults else None)
        sp.add_argument("--format", choices=("csv", "json"), default="csv" if defaults else None)
        sp.add_argument("--out", default=None, help="output file (default: stdout for eval)")

    e = sub.add_parser("eval", help="functionals of one density at one time")
    e.add_argument("spec")
    e.add_argument("--t", type=float, required=True)
    grid_flags(e, True)
    e.set_defaults(func=cmd_eval)

    for name, func, helptext in (("sweep", cmd_sweep, "curves over a t lattice"),
                                 ("verify", cmd_verify, "run inequality checks")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("specs", nargs="*", help="density specs (default: the built-in suite)")
        s.add_argument("--t-start", dest="t_start", type=float)
        s.add_argument("--t-end", dest="t_end", type=float)
        s.add_argument("--points", type=int)
        s.add_argument("--spacing", choices=("linear", "log"))
        s.add_argument("--checks", help="comma-separated check names")
        s.add_argument("--explore", action="store_true", help="run log-concave-only checks on any density, ungraded")
        s.add_argument("--config", help="JSON config file")
        grid_flags(s, False)
        s.set_defaults(func=func)

    f = sub.add_parser("families", help="list the analytic catalog")
    f.set_defaults(func=cmd_families)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
