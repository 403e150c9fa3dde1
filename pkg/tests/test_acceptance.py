"""End-to-end acceptance checks, one test per criterion.

Each test records a ``criterion n: PASS|FAIL ...`` line that is echoed in the
terminal summary, so a plain ``pytest`` run shows every verdict.
"""

import math
import time

import numpy as np
import pytest

from bubblereduce.constants import DEFAULT_DIMS, cross_check_table
from bubblereduce.geometry import (
    builtin_profiles, grushin_to_hs, heisenberg_bubble_profile, hs_bubble_profile,
    norm_identity_ratio,
)
from bubblereduce.interaction import (
    dlambda_interaction, dlambda_leading, ladder_config, lemma_ladder, loglog_slope,
)
from bubblereduce.model_core import (
    Bubble, ConstantModel, PerturbativeModel, SpaceDims, TwoBubbleConfig, bubble_eval, bubble_grad,
)
from bubblereduce.reduction import (
    ConcentrationAnsatz, ReducedSystem, log_root, newton_solve, solve_theorem23,
    theorem24_exponents, theorem24_scales, winding_degree,
)
from bubblereduce.residual import energy, energy_gradient, strong_residual, unit_ansatz

from conftest import (
    ACCEPTANCE_LINES, ADMISSIBLE, ASYMMETRIC, SEPARATIONS, bisection_oracle, symmetric_landscape,
)

pytestmark = pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")


def verdict(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def decreasing(vals):
    return all(b < a for a, b in zip(vals[:-1], vals[1:]))


def test_1_constant_ledger():
    t0 = time.perf_counter()
    rep = cross_check_table(DEFAULT_DIMS)
    secs = time.perf_counter() - t0
    ok = rep.ok and rep.signs_ok and rep.max_rel_diff <= 1e-5 and secs < 120
    assert verdict(1, ok, f"max_rel={rep.max_rel_diff:.2e} signs={rep.signs_ok} "
                          f"rows={len(rep.rows)} time={secs:.1f}s")


def test_2_cr_constants():
    rng = np.random.default_rng(2)
    r, t = rng.uniform(0, 5, 64), rng.uniform(-5, 5, 64)
    worst_c0, worst_norm = 0.0, 0.0
    for n in (1, 2):
        dims = SpaceDims.from_cr(n)
        euclid = ((dims.N - 2) * (dims.k - 1)) ** ((dims.N - 2) / 2)
        v = grushin_to_hs(heisenberg_bubble_profile(n))
        c0 = euclid * v(r, t) / hs_bubble_profile(dims)(r, t)
        worst_c0 = max(worst_c0, float(np.max(np.abs(c0 / (2 * n) ** n - 1))))
        target = 2.0 if n == 1 else math.pi
        for name in ("bubble", "power"):
            ratio = norm_identity_ratio(builtin_profiles()[f"{name}{n}"], n)
            worst_norm = max(worst_norm, abs(ratio / target - 1))
    ok = worst_c0 <= 1e-12 and worst_norm <= 1e-6
    assert verdict(2, ok, f"c0 rel={worst_c0:.1e} norm-ratio rel={worst_norm:.1e}")


def test_3_single_bubble_exactness():
    t0 = time.perf_counter()
    worst = 0.0
    for dims in (SpaceDims(3, 2, 1), SpaceDims(4, 2, 2), SpaceDims(5, 3, 2)):
        a = ConcentrationAnsatz((Bubble(dims, np.zeros(dims.h), 2.0),))
        worst = max(worst, *strong_residual(a, ConstantModel(dims, 1.0)))
    secs = time.perf_counter() - t0
    ok = worst < 1e-10 and secs < 30
    assert verdict(3, ok, f"max(sup, L2)={worst:.2e} time={secs:.1f}s")


def test_4_interaction_asymptotics():
    t0 = time.perf_counter()
    dims = SpaceDims(4, 3, 1)
    rep = lemma_ladder("5.1", dims)
    eps = [r[1] for r in rep.rows]
    mixed = loglog_slope(eps, [r[5] for r in rep.rows])
    ok_a = abs(rep.slope - 1) <= 0.05 and abs(rep.ratio - 1) <= 0.05
    ok_b = mixed > 1.05
    curv = []
    for d in (SpaceDims(4, 3, 1), SpaceDims(5, 3, 2)):
        r3 = lemma_ladder("5.3", d)
        curv.append((d, r3.gamma, r3.slope, abs(r3.slope + r3.gamma + 1) <= 0.05))
    secs = time.perf_counter() - t0
    ok = ok_a and ok_b and all(c[3] for c in curv) and secs < 600
    detail = "; ".join(f"{d.as_tuple()} gamma={g} slope={s:.3f}" for d, g, s, _ in curv)
    assert verdict(4, ok, f"(a) slope={rep.slope:.3f} ratio={rep.ratio:.4f} "
                          f"(b) mixed={mixed:.3f} (c) {detail} time={secs:.1f}s")


def test_5_degree_certificate():
    t0 = time.perf_counter()
    degs, enlarged = [], []
    for gammas, cs in ADMISSIBLE:
        sys = ReducedSystem(gammas[0], gammas[1], 5, cs[0], cs[1])
        degs.append(winding_degree(sys))
        m1, m2 = sys.box
        enlarged.append(winding_degree(sys, box=(m1 / 10, m2 * 10)))
    sys = ReducedSystem(2.0, 2.5, 5, 0.7, 1.9)
    r = max(log_root(sys))
    zero = winding_degree(sys, box=(2 * r, 10 * r))
    secs = time.perf_counter() - t0
    ok = (len(degs) == 9 and all(d == -1 for d in degs + enlarged) and zero == 0
          and secs < 60)
    assert verdict(5, ok, f"degrees={degs} enlarged={enlarged} root-free={zero} "
                          f"time={secs:.1f}s")


def test_6_reduced_solver_oracle():
    worst = 0.0
    for sys in ASYMMETRIC:
        t, ref = newton_solve(sys), bisection_oracle(sys)
        worst = max(worst, *(abs(a / b - 1) for a, b in zip(t, ref)))
    sym = 0.0
    for N, g, c in ((5, 2.0, 0.3), (4, 1.5, 4.0), (3, 0.5, 2.0)):
        t = newton_solve(ReducedSystem(g, g, N, c, c))
        sym = max(sym, *(abs(x / c ** (1 / (N - 2 - g)) - 1) for x in t))
    ok = worst <= 1e-8 and sym <= 1e-12
    assert verdict(6, ok, f"newton vs bisection rel={worst:.1e} symmetric rel={sym:.1e}")


def test_7_scaling_laws():
    dims = SpaceDims(5, 4, 1)
    g1, g2, N = 2.0, 2.5, 5
    pts = (PerturbativeModel(dims, [-1.0], 0.0, g1, -np.ones(4), -np.ones(1)),
           PerturbativeModel(dims, [1.0], 0.0, g2, -np.ones(4), -np.ones(1)))
    eps = np.array([1e-2, 1e-3, 1e-4])
    lams = np.array([[b.lam for b in solve_theorem23(pts, e).bubbles] for e in eps])
    den = (N - 2) * (g1 + g2) / 2 - g1 * g2
    err23 = max(abs(np.polyfit(np.log(1 / eps), np.log(lams[:, j]), 1)[0] - g1 * g2 / (gj * den))
                for j, gj in enumerate((g1, g2)))
    h1, h2 = 3.5, 4.0
    s = np.array([10.0, 40.0, 160.0])
    L = np.array([theorem24_scales(h1, h2, N, x) for x in s])
    e1, e2 = theorem24_exponents(h1, h2, N)
    printed = (N - 2) * h2 / (h1 * h2 - (h1 + h2) * (N - 2) / 2)
    err24 = max(abs(np.polyfit(np.log(s), np.log(L[:, 0]), 1)[0] - printed),
                abs(np.polyfit(np.log(s), np.log(L[:, 1]), 1)[0] - e2), abs(e1 - printed))
    ok = err23 <= 1e-10 and err24 <= 1e-10
    assert verdict(7, ok, f"epsilon-path slope err={err23:.1e} separation-path err={err24:.1e}")


def test_8_end_to_end_decay(thm24_sweep):
    land = symmetric_landscape()
    res23 = []
    for e in (1e-2, 3e-3, 1e-3):
        ans = solve_theorem23(land, e)
        res23.append(strong_residual(ans, ans.model, method="stable"))
    res24, interior = [], True
    for s in SEPARATIONS:
        model, ans = thm24_sweep[s]
        res24.append(strong_residual(ans, model, method="stable"))
        interior &= all(np.linalg.norm(o) <= 10.0 / b.lam
                        for b, o in zip(ans.bubbles, ans.offsets))
    ok23 = all(decreasing([r[i] for r in res23]) for i in (0, 1))
    ok24 = all(decreasing([r[i] for r in res24]) for i in (0, 1)) and interior
    fmt = lambda rs: "/".join(f"{r[0]:.2e}" for r in rs)
    assert verdict(8, ok23 and ok24, f"epsilon sup {fmt(res23)}; separation sup {fmt(res24)} "
                                     f"interior={interior}")


def _fd_energy_dlam(cfg, model, rel_step=1e-3):
    lam = cfg.b1.lam
    h = rel_step * lam

    def J(l1):
        return energy(unit_ansatz(TwoBubbleConfig(cfg.b1.moved(lam=l1), cfg.b2)), model)

    return (J(lam + h) - J(lam - h)) / (2 * h)


def test_9_gradient_consistency():
    worst_grad = 0.0
    for dims in (SpaceDims(3, 2, 1), SpaceDims(4, 2, 2), SpaceDims(4, 3, 1), SpaceDims(5, 3, 2)):
        b = Bubble(dims, np.linspace(-0.3, 0.4, dims.h), 4.0)
        s, z = 0.35, np.full(dims.h, 0.1)
        dlam, _ = bubble_grad(b, s, z)
        h = 1e-5
        fd = (bubble_eval(b.moved(lam=4.0 + h), s, z) - bubble_eval(b.moved(lam=4.0 - h), s, z))
        worst_grad = max(worst_grad, abs(float(dlam) / float(fd / (2 * h)) - 1))
    dims = SpaceDims(4, 3, 1)
    cfg = ladder_config(dims, 40.0)
    model = ConstantModel(dims, 1.0)
    fd = _fd_energy_dlam(cfg, model)
    # p = 3 when N = 4, so with unit amplitudes and constant curvature the cross term
    # 2 U1 U2 is the whole nonlinear coupling and dJ/dlam_1 is minus the interaction
    # derivative with no remainder
    via_interaction = -dlambda_interaction(cfg, 1)
    via_gradient = energy_gradient(unit_ansatz(cfg), model).dlam[0]
    err_i = abs(via_interaction / fd - 1)
    err_g = abs(via_gradient / fd - 1)
    ok = worst_grad < 1e-4 and err_i < 1e-4 and err_g < 1e-4
    assert verdict(9, ok, f"bubble_grad rel={worst_grad:.1e} interaction dJ/dlam rel={err_i:.1e} "
                          f"energy_gradient rel={err_g:.1e} at lambda=40")


@pytest.mark.xfail(strict=True, reason="leading terms drop O(eps12^tau) corrections of a few "
                                       "percent at lambda=40; 1e-4 is out of reach by design")
def test_9_leading_term_gradient():
    dims = SpaceDims(4, 3, 1)
    cfg = ladder_config(dims, 40.0)
    fd = _fd_energy_dlam(cfg, ConstantModel(dims, 1.0))
    ratio = -dlambda_leading(cfg, 1) / fd
    ok = abs(ratio - 1) < 1e-4
    verdict("9 (leading-term variant)", ok, f"leading/finite-difference ratio={ratio:.5f}")
    assert ok
