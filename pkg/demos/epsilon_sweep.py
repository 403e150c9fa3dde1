"""Solve the two-point perturbative problem over a ladder of epsilon values.

Prints the bubble rates, the degree certificate and the strong residual for
each epsilon; the residual should fall as epsilon shrinks.

    python3 demos/epsilon_sweep.py
"""

import numpy as np

from bubblereduce.model_core import PerturbativeLandscape, PerturbativeModel, SpaceDims
from bubblereduce.reduction import solve_theorem23
from bubblereduce.residual import strong_residual


def main():
    dims = SpaceDims(5, 4, 1)
    land = PerturbativeLandscape(tuple(
        PerturbativeModel(dims, [c], 0.0, 2.0, -np.ones(dims.k), -np.ones(dims.h))
        for c in (-1.0, 1.0)))
    print(f"{'epsilon':>9} {'lambda1':>12} {'lambda2':>12} {'degree':>6} {'res_sup':>10} {'res_l2':>10}")
    for eps in (1e-2, 3e-3, 1e-3):
        ans = solve_theorem23(land, eps)
        sup, l2 = strong_residual(ans, ans.model, method="stable")
        lam1, lam2 = (b.lam for b in ans.bubbles)
        print(f"{eps:9.1e} {lam1:12.4f} {lam2:12.4f} {ans.certificates['degree']:6d} "
              f"{sup:10.3e} {l2:10.3e}")


if __name__ == "__main__":
    main()
