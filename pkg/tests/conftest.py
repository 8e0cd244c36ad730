import numpy as np
import pytest

from entropyflow import Flow
from entropyflow.density import parse_density

SUITE = (
    "gaussian:mu=0,sigma2=1",
    "logistic:scale=1",
    "gumbel:scale=1",
    "gamma:shape=2,scale=1",
    "weibull:shape=2,scale=1",
)
LATTICE = [float(t) for t in np.linspace(0.1, 2.0, 20)]
BIMODAL = "mix:0.5*gaussian:mu=-3,sigma2=1+0.5*gaussian:mu=3,sigma2=1"

_FLOWS: dict = {}


def flow_for(spec: str, m: int = 4096) -> Flow:
    """Session-wide memoized flow, so expensive evolutions are shared across tests."""
    key = (spec, m)
    if key not in _FLOWS:
        _FLOWS[key] = Flow(parse_density(spec, m), m)
    return _FLOWS[key]


@pytest.fixture(params=SUITE)
def suite_spec(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        ok, text = results[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {text}")
