"""Run every single-density check on a base and print the worst slack against its gate."""

import sys
import warnings

import numpy as np

from entropyflow import Flow
from entropyflow.density import parse_density
from entropyflow.errors import NotLogConcaveWarning
from entropyflow.inequalities import (
    check_costa,
    check_dem,
    check_fisher_concavity,
    check_ine_m_curve,
    check_ineK,
    check_iso_family,
    check_third_derivative,
)


def main(spec: str = "gumbel:scale=1") -> None:
    flow = Flow(parse_density(spec))
    lattice = list(np.linspace(0.1, 2.0, 10))
    reports = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotLogConcaveWarning)
        for check in (check_costa, check_fisher_concavity, check_ineK, check_iso_family):
            reports.extend(check(flow, lattice, explore=True))
        for check in (check_third_derivative, check_dem, check_ine_m_curve):
            reports.append(check(flow, lattice, explore=True))
    print(f"{spec}")
    print(f"{'check':<18} {'min slack':>12} {'at t':>7} {'gate':>10}  verdict")
    for r in reports:
        mark = "" if r.graded else " (ungraded)"
        print(f"{r.name:<18} {r.min_slack:12.4e} {r.argmin_t:7.3f} {r.err_gate:10.2e}  {r.verdict}{mark}")


if __name__ == "__main__":
    main(*sys.argv[1:])
