"""Print H, N, I, J, K and p = nJ/I^2 along the heat flow of a few bases."""

import numpy as np

from entropyflow import Flow
from entropyflow.density import parse_density
from entropyflow.functionals import record

SPECS = ("gaussian:sigma2=1", "logistic:scale=1", "gamma:shape=2", "weibull:shape=2")


def main() -> None:
    for spec in SPECS:
        flow = Flow(parse_density(spec))
        print(spec)
        print(f"{'t':>6} {'H':>10} {'N':>10} {'I':>10} {'J':>10} {'K':>10} {'p':>10}")
        for t in np.linspace(0.1, 2.0, 5):
            r = record(flow, t)
            print(f"{t:6.3f} {r.H:10.6f} {r.N:10.6f} {r.I:10.6f} {r.J:10.6f} {r.K:10.6f} {r.p:10.6f}")
        print()


if __name__ == "__main__":
    main()
