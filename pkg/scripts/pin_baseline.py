#!/usr/bin/env python3
"""Produce the pinned regression baselines with the external (cvxpy) backend.

Run once; paste the printed values into tests/test_acceptance.py.  The
external route is independent of the embedded interior-point code, so these
numbers guard both the LMI assembly and the solver.
"""

import numpy as np

from lurebound.analysis import AnalysisRequest, builtin_plant, compute_gamma_star

POINTS = [
    (1.0, 0, "hard"),
    (1.0, 1, "terminal"),
    (1.0, 1, "hard"),
    (2.5, 2, "terminal"),
    (2.5, 2, "hard"),
    (3.0, 3, "terminal"),
]


def main():
    print("# (L, nu, mode): gamma*  [external backend]")
    for L, nu, mode in POINTS:
        res = compute_gamma_star(
            AnalysisRequest(builtin_plant(L), nu, nu, mode, backend="external"))
        print(f"({L}, {nu}, {mode!r}): {res.gamma!r},   # status {res.status}")


if __name__ == "__main__":
    main()
