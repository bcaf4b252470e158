"""Manufactured-solution convergence in space and time.

The spatial ladder uses an analytic (geometrically decaying) profile so the
spectral error falls faster than any power of M; the temporal ladder shows
the first-order accuracy of the linearly implicit step.

    python demos/convergence.py
"""

import numpy as np

from stressdiff import Parameters
from stressdiff.mms import Rung, convergence_study, default_solution


def show(title, table, column):
    print(title)
    for name in ("rho", "u", "b"):
        errs = table.errors("linf", name)
        orders = table.orders("linf", name)
        cells = "  ".join(f"{e:9.2e}" for e in errs)
        print(f"  {name:>3}: {cells}   {column} {np.array2string(orders[1:], precision=2)}")


def main():
    p = Parameters()
    spatial = convergence_study(default_solution(2, p, steady=True, decay=0.3), p,
                                [Rung(m, 1e-5) for m in (16, 32, 64)], 2e-3)
    show("spatial, M = 16, 32, 64 (L_inf error)", spatial, "orders")
    temporal = convergence_study(default_solution(2, p), p,
                                 [Rung(32, dt) for dt in (4e-3, 2e-3, 1e-3, 5e-4)], 0.2)
    show("temporal, dt = 4e-3 ... 5e-4 (L_inf error)", temporal, "orders")


if __name__ == "__main__":
    main()
