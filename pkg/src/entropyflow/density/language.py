"""Parser for the density mini-language.

    family:key=val,...         analytic catalog member (bare ``family`` uses defaults)
    grid:file=PATH             two-column ``x,logf`` CSV
    product:spec1|spec2|...    independent coordinates
    mix:w1*spec1+w2*spec2      mixture (sampled on a grid)
"""

from __future__ import annotations

import re

from ..errors import ParamOutOfRange, SpecError, UnknownFamily
from .families import FAMILIES, AnalyticDensity
from .grid import DEFAULT_M, DEFAULT_TAIL_EPS, Density, ProductDensity, mixture, read_grid_csv

# split mixture terms on '+' only when the next token is "<weight>*"
_MIX_SPLIT = re.compile(r"\+(?=\s*(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?\s*\*)")


def from_family(spec: str) -> AnalyticDensity:
    """Parse ``name:key=value[,key=value]*`` into an analytic density.

    >>> from_family("gaussian:mu=0,sigma2=1").label
    'gaussian:mu=0,sigma2=1'
    """
    spec = spec.strip()
    name, _, rest = spec.partition(":")
    name = name.strip().lower()
    if name not in FAMILIES:
        raise UnknownFamily(f"unknown family {name!r}; known: {', '.join(FAMILIES)}")
    params: dict[str, float] = {}
    if rest.strip():
        for item in rest.split(","):
            key, eq, val = item.partition("=")
            if not eq:
                raise SpecError(f"expected key=value in {spec!r}, got {item!r}")
            try:
                params[key.strip()] = float(val)
            except ValueError:
                raise ParamOutOfRange(f"parameter {key.strip()!r} is not a number: {val!r}") from None
    return AnalyticDensity.make(name, **params)


def parse_density(spec: str, m: int = DEFAULT_M, tail_eps: float = DEFAULT_TAIL_EPS) -> Density:
    """Parse any mini-language term. Mixtures are sampled with ``m`` nodes."""
    spec = spec.strip()
    head, _, rest = spec.partition(":")
    head = head.strip().lower()
    if head == "grid":
        key, eq, path = rest.partition("=")
        if key.strip() != "file" or not eq or not path.strip():
            raise SpecError(f"grid spec must be grid:file=PATH, got {spec!r}")
        return read_grid_csv(path.strip())
    if head == "product":
        parts = [p for p in rest.split("|") if p.strip()]
        if not parts:
            raise SpecError(f"empty product spec {spec!r}")
        factors = []
        for p in parts:
            f = parse_density(p, m, tail_eps)
            if isinstance(f, ProductDensity):
                raise SpecError("nested products are not supported")
            factors.append(f)
        return ProductDensity(tuple(factors))
    if head == "mix":
        weights, comps = [], []
        for term in _MIX_SPLIT.split(rest):
            w, star, comp = term.partition("*")
            if not star:
                raise SpecError(f"mixture term must be weight*spec, got {term!r}")
            try:
                weights.append(float(w))
            except ValueError:
                raise SpecError(f"bad mixture weight {w!r}") from None
            c = parse_density(comp, m, tail_eps)
            if isinstance(c, ProductDensity):
                raise SpecError("mixtures of products are not supported")
            comps.append(c)
        g = mixture(comps, weights, m, tail_eps)
        return g
    return from_family(spec)
