import json
import math

import numpy as np
import pytest
from scipy import integrate

from bubblereduce.constants import theta_closed
from bubblereduce.errors import AdmissibilityError, DomainError, InconclusiveDegreeError
from bubblereduce.model_core import Bubble, PerturbativeModel, SpaceDims, c_nk
from bubblereduce.reduction import (
    BoundaryRootWarning, ConcentrationAnsatz, ReducedSystem, l_epsilon, l_epsilon_exponent,
    log_root, moment_integral, newton_solve, reduced_residual, reduced_system_for,
    single_peak_shadow, solve_theorem23, theorem24_exponents, theorem24_leading_t,
    theorem24_scales, winding_degree,
)
from bubblereduce.residual import energy_excess

from conftest import (ADMISSIBLE, ASYMMETRIC, SEPARATIONS, bisection_oracle, maxpoint_model,
                      symmetric_landscape)

@pytest.mark.parametrize("sys", ASYMMETRIC, ids=lambda s: f"g{s.gamma1}-{s.gamma2}")
def test_newton_matches_bisection_oracle(sys):
    t = newton_solve(sys)
    f = reduced_residual(sys, *t)
    assert max(abs(f[0]), abs(f[1])) < 1e-12
    ref = bisection_oracle(sys)
    assert t[0] == pytest.approx(ref[0], rel=1e-8)
    assert t[1] == pytest.approx(ref[1], rel=1e-8)
    assert np.allclose(t, log_root(sys), rtol=1e-10)


@pytest.mark.parametrize("N,gamma,c", [(5, 2.0, 0.3), (4, 1.5, 4.0), (3, 0.5, 2.0)])
def test_symmetric_closed_form(N, gamma, c):
    t = newton_solve(ReducedSystem(gamma, gamma, N, c, c))
    expected = c ** (1.0 / (N - 2 - gamma))
    assert t[0] == pytest.approx(expected, rel=1e-12)
    assert t[1] == pytest.approx(expected, rel=1e-12)


def test_jacobian_matches_finite_differences():
    sys = ASYMMETRIC[0]
    t = np.array([1.3, 0.7])
    J = sys.jacobian(*t)
    h = 1e-6
    for col in range(2):
        e = np.zeros(2)
        e[col] = h
        fd = (np.array(sys(*(t + e))) - np.array(sys(*(t - e)))) / (2 * h)
        assert np.allclose(J[:, col], fd, rtol=1e-7)


def test_boundary_root_warns():
    sys = ReducedSystem(2.0, 2.0, 5, 1.0, 1.0, box=(2.0, 3.0))
    with pytest.warns(BoundaryRootWarning):
        newton_solve(sys)


@pytest.mark.parametrize("gammas,cs", ADMISSIBLE)
def test_winding_degree_minus_one(gammas, cs):
    sys = ReducedSystem(gammas[0], gammas[1], 5, cs[0], cs[1])
    assert winding_degree(sys) == -1
    m1, m2 = sys.box
    assert winding_degree(sys, box=(m1 / 10, m2 * 10)) == -1


def test_winding_degree_zero_without_root():
    sys = ReducedSystem(2.0, 2.5, 5, 0.7, 1.9)
    r = log_root(sys)
    assert winding_degree(sys, box=(2 * max(r), 10 * max(r))) == 0


def test_winding_degree_inconclusive_on_boundary():
    sys = ReducedSystem(2.0, 2.0, 5, 1.0, 1.0)
    with pytest.raises(InconclusiveDegreeError):
        winding_degree(sys, box=(1.0, 4.0))


def test_scaling_law_epsilon_algebra():
    g = 2.0
    assert l_epsilon_exponent(g, g, 5) == pytest.approx(-g * g / (1.5 * 2 * g - g * g))
    assert l_epsilon(g, g, 5, 1e-2) == pytest.approx(1e-2 ** -2.0)
    with pytest.raises(DomainError):
        l_epsilon_exponent(3.0, 3.0, 5)


def test_theorem23_lambda_slopes():
    dims = SpaceDims(5, 4, 1)
    pts = (PerturbativeModel(dims, [-1.0], 0.0, 2.0, -np.ones(4), -np.ones(1)),
           PerturbativeModel(dims, [1.0], 0.0, 2.5, -np.ones(4), -np.ones(1)))
    eps = np.array([1e-2, 1e-3, 1e-4])
    lams = np.array([[b.lam for b in solve_theorem23(pts, e).bubbles] for e in eps])
    g1, g2, N = 2.0, 2.5, 5
    den = (N - 2) * (g1 + g2) / 2 - g1 * g2
    for j, gj in enumerate((g1, g2)):
        slope = np.polyfit(np.log(1 / eps), np.log(lams[:, j]), 1)[0]
        assert slope == pytest.approx(g1 * g2 / (gj * den), abs=1e-10)


def test_theorem23_ansatz_and_certificates():
    a = solve_theorem23(symmetric_landscape(), 1e-3)
    assert a.certificates["degree"] == -1
    assert a.certificates["residual_sup"] < 1e-12
    l1, l2 = (b.lam for b in a.bubbles)
    assert l1 == pytest.approx(l2, rel=1e-12)
    d = json.loads(a.to_json())
    assert d["certificates"]["degree"] == -1
    assert [b["eta"] for b in d["bubbles"]] == [[-1.0], [1.0]]


def test_theorem23_rejects_inadmissible():
    dims = SpaceDims(5, 4, 1)
    pts = tuple(PerturbativeModel(dims, [c], 0.0, 2.0, np.ones(4), np.ones(1))
                for c in (-1.0, 1.0))
    with pytest.raises(AdmissibilityError):
        reduced_system_for(pts)
    with pytest.raises(AdmissibilityError):
        ReducedSystem(2.0, 2.0, 5, -1.0, 1.0)


def test_theorem23_rejects_large_epsilon():
    with pytest.raises(DomainError):
        solve_theorem23(symmetric_landscape(), 0.5)


def test_single_peak_shadow_has_no_root():
    pt = symmetric_landscape().points[0]
    out = single_peak_shadow(pt)
    assert out["bracket"] > 0 and not out["has_positive_root"]


def test_theorem24_exponents():
    # symmetric gamma: L = s^((N-2)/(gamma-(N-2)))
    e1, e2 = theorem24_exponents(3.5, 3.5, 5)
    assert e1 == pytest.approx(3 / 0.5, abs=1e-12) and e2 == e1
    e1, e2 = theorem24_exponents(3.5, 4.0, 5)
    den = 3.5 * 4.0 - 7.5 * 1.5
    assert e1 == pytest.approx(3 * 4.0 / den, abs=1e-12)
    assert e2 == pytest.approx(3 * 3.5 / den, abs=1e-12)
    s = np.array([10.0, 40.0, 160.0])
    L1 = np.array([theorem24_scales(3.5, 4.0, 5, x)[0] for x in s])
    assert np.polyfit(np.log(s), np.log(L1), 1)[0] == pytest.approx(e1, abs=1e-10)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_moment_integral_against_scipy():
    dims = SpaceDims(5, 4, 1)
    b = Bubble(dims, [0.0], 1.0)
    p = dims.p
    wk = 2 * math.pi ** 2

    def f(t, s):
        return 2 * (s * s + t * t) ** 1.75 * b.profile_power(s, t * t, p) * s ** 2

    val = wk * integrate.dblquad(f, 0, np.inf, 0, np.inf, epsabs=0, epsrel=1e-10)[0]
    assert moment_integral(dims, 3.5) == pytest.approx(val, rel=1e-7)


def test_leading_t_symmetric_closed_form():
    # on the diagonal 2 alpha t^-g - beta t^-(N-2) is minimal at
    # t^(g-(N-2)) = g alpha / (m beta)
    model = maxpoint_model(50.0)
    dims = model.dims
    g, N, m = 3.5, 5, 1.5
    s = 50.0
    L = s ** 6
    alpha = dims.p ** -1 * moment_integral(dims, g) * L ** -g / (L * L * s * s) ** -m
    beta = c_nk(dims) * theta_closed(dims)
    t = (g * alpha / (m * beta)) ** (1 / (g - (N - 2)))
    t1, t2 = theorem24_leading_t(model)
    assert t1 == pytest.approx(t, rel=1e-6) and t2 == pytest.approx(t, rel=1e-6)


def test_ansatz_levels_and_anchors():
    dims = SpaceDims(5, 4, 1)
    b = (Bubble(dims, [1.0], 2.0), Bubble(dims, [3.0], 2.0))
    a = ConcentrationAnsatz(b, levels=(4.0, 1.0))
    assert a.amplitudes == pytest.approx((4.0 ** -1.5, 1.0))
    with pytest.raises(DomainError):
        ConcentrationAnsatz(b, amplitudes=(1.0, 1.0), levels=(4.0, 1.0))
    with pytest.raises(DomainError):
        ConcentrationAnsatz(b, anchors=([0.0], [0.0]), offsets=([0.5], [3.0]))
    with pytest.raises(DomainError):
        ConcentrationAnsatz(b, offsets=([0.5], [3.0]))
    anc = ConcentrationAnsatz(b, anchors=([0.0], [2.0]))
    assert [o.tolist() for _, o in anc.local_centres()] == [[1.0], [1.0]]
    assert "anchors" in anc.to_dict()
    with pytest.raises(DomainError):
        ConcentrationAnsatz(b * 2)


def test_theorem24_rejects_wrong_model():
    from bubblereduce.reduction import solve_theorem24
    with pytest.raises(DomainError):
        solve_theorem24(symmetric_landscape())


@pytest.mark.slow
def test_theorem24_monotone_and_interior(thm24_sweep):
    lams = [[b.lam for b in thm24_sweep[s][1].bubbles] for s in SEPARATIONS]
    for j in range(2):
        assert all(a[j] < b[j] for a, b in zip(lams, lams[1:]))
    for s in SEPARATIONS:
        ans = thm24_sweep[s][1]
        for b, o in zip(ans.bubbles, ans.offsets):
            assert np.linalg.norm(o) <= 10.0 / b.lam
        assert ans.certificates["interior"]
        assert ans.amplitudes == (1.0, 1.0)


@pytest.mark.slow
def test_theorem24_minimum_below_feasible_points(thm24_sweep):
    model, ans = thm24_sweep[50.0]
    L = ans.certificates["L"]
    reduced = ans.certificates["reduced_energy"]
    assert reduced < 0
    for t0 in [(1.0, 1.0), (3.0, 6.0), (8.0, 8.0), (4.0, 5.5)]:
        bubbles = tuple(Bubble(model.dims, c, t * Lj)
                        for c, t, Lj in zip(model.centers, t0, L))
        trial = ConcentrationAnsatz(bubbles, model=model, levels=(1.0, 1.0),
                                    anchors=model.centers, offsets=([0.0], [0.0]))
        assert reduced <= energy_excess(trial, model)
