import itertools
import math

import numpy as np
import pytest
from scipy import optimize

from bubblereduce.model_core import MaxPointModel, PerturbativeLandscape, PerturbativeModel, SpaceDims
from bubblereduce.reduction import ReducedSystem, reduced_residual, solve_theorem24

MAXPOINT_DIMS = SpaceDims(5, 4, 1)
SEPARATIONS = (50.0, 100.0, 200.0)

# one verdict line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []

ASYMMETRIC = [
    ReducedSystem(2.0, 2.5, 5, 0.7, 1.9),
    ReducedSystem(1.5, 1.2, 4, 3.0, 0.4),
    ReducedSystem(2.2, 1.4, 5, 0.05, 12.0),
    ReducedSystem(0.6, 0.3, 3, 1.5, 2.5),
    ReducedSystem(2.9, 1.1, 5, 7.0, 0.8),
]


def bisection_oracle(sys):
    """Nested bisection in log t, seeded by a 400 x 400 grid scan of |f|."""
    def t2_of(t1):
        g = lambda x2: reduced_residual(sys, t1, math.exp(x2))[1] / math.exp(-sys.gamma2 * x2)
        return math.exp(optimize.bisect(g, -60, 60, xtol=1e-15, maxiter=400))

    def outer(x1):
        t1 = math.exp(x1)
        f1, _ = reduced_residual(sys, t1, t2_of(t1))
        return f1 / t1 ** (-sys.gamma1)

    xs = np.linspace(-12, 12, 400)
    X1, X2 = np.meshgrid(xs, xs, indexing="ij")
    f1, f2 = reduced_residual(sys, np.exp(X1), np.exp(X2))
    i, _ = np.unravel_index(np.argmin(np.hypot(f1 * np.exp(sys.gamma1 * X1),
                                               f2 * np.exp(sys.gamma2 * X2))), X1.shape)
    lo, hi = xs[max(i - 2, 0)], xs[min(i + 2, len(xs) - 1)]
    while outer(lo) * outer(hi) > 0:
        lo, hi = lo - 1.0, hi + 1.0
    x1 = optimize.bisect(outer, lo, hi, xtol=1e-15, maxiter=400)
    return math.exp(x1), t2_of(math.exp(x1))


ADMISSIBLE = list(itertools.product([(2.0, 2.5), (1.5, 2.8)], [(0.5, 2.0), (3.0, 3.0)])) + [
    ((2.5, 1.2), (0.1, 10.0)), ((1.1, 1.9), (5.0, 0.2)), ((2.9, 2.9), (1.0, 1.0)),
    ((2.0, 2.0), (0.01, 0.02)), ((1.3, 2.6), (40.0, 7.0))]


def symmetric_landscape(dims=SpaceDims(5, 4, 1), gamma=2.0, half=1.0):
    """Two flatness points at +-half on the z-axis with all coefficients -1."""
    pts = tuple(PerturbativeModel(dims, [c], 0.0, gamma, -np.ones(dims.k), -np.ones(dims.h))
                for c in (-half, half))
    return PerturbativeLandscape(pts)


def maxpoint_model(s, dims=MAXPOINT_DIMS, gamma=3.5):
    return MaxPointModel(dims, ([-s / 2], [s / 2]), (1.0, 1.0), (gamma, gamma), (1.0, 1.0),
                         0.5, 2.0)


@pytest.fixture(scope="session")
def thm24_sweep():
    """Minimizers of the maximum-point route for the standard separation ladder."""
    out = {}
    for s in SEPARATIONS:
        model = maxpoint_model(s)
        out[s] = (model, solve_theorem24(model))
    return out


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
