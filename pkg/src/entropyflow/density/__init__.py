"""Densities: analytic catalog, grids, products, mixtures."""

from .families import FAMILIES, LOG_ZERO, AnalyticDensity
from .grid import (
    DEFAULT_M,
    DEFAULT_TAIL_EPS,
    Density,
    Density1D,
    GridDensity,
    ProductDensity,
    dilate,
    discretize,
    is_log_concave,
    mixture,
    normalize,
    product,
    quadrature_weights,
    read_grid_csv,
    resample,
    to_grid,
    window,
    write_grid_csv,
)
from .language import from_family, parse_density

__all__ = [
    "FAMILIES",
    "LOG_ZERO",
    "AnalyticDensity",
    "DEFAULT_M",
    "DEFAULT_TAIL_EPS",
    "Density",
    "Density1D",
    "GridDensity",
    "ProductDensity",
    "dilate",
    "discretize",
    "from_family",
    "is_log_concave",
    "mixture",
    "normalize",
    "parse_density",
    "product",
    "quadrature_weights",
    "read_grid_csv",
    "resample",
    "to_grid",
    "window",
    "write_grid_csv",
]
