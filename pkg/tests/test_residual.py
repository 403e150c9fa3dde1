import numpy as np
import pytest

from bubblereduce.constants import A_closed, theta_closed
from bubblereduce.errors import DomainError
from bubblereduce.interaction import ladder_config, loglog_slope
from bubblereduce.model_core import Bubble, ConstantModel, SpaceDims, c_nk
from bubblereduce.reduction import ConcentrationAnsatz
from bubblereduce.residual import (
    SWEEP_COLUMNS, GridSpec, energy, energy_and_gradient, energy_excess, energy_gradient,
    f_epsilon_norm_proxy, mix_power, pohozaev_integral, single_energy, strong_residual,
    sweep_report, unit_ansatz,
)

from conftest import symmetric_landscape


def one(dims, eta=None, lam=3.0, **kw):
    eta = np.zeros(dims.h) if eta is None else eta
    return ConcentrationAnsatz((Bubble(dims, eta, lam),), **kw)


def test_mix_power_matches_direct_and_small_ratio():
    A = np.array([1.0, 2.0, 0.0, 3.0])
    B = np.array([0.5, 2.0, 1.0, 0.0])
    q = 7 / 3
    assert np.allclose(mix_power(A, B, q), (A + B) ** q - A ** q - B ** q, rtol=1e-13, atol=1e-15)
    # for B << A the leading term is q A^(q-1) B, far below the rounding of (A+B)^q
    small = mix_power(1.0, 1e-20, q)
    assert small == pytest.approx(q * 1e-20, rel=1e-10)


@pytest.mark.parametrize("dims", [SpaceDims(3, 2, 1), SpaceDims(4, 2, 2), SpaceDims(5, 3, 2)],
                         ids=str)
def test_single_bubble_energy(dims):
    # multiply the limiting equation by U: I(U) = A / (2(N-1))
    e = energy(one(dims), ConstantModel(dims, 1.0))
    assert e == pytest.approx(A_closed(dims) / (2 * (dims.N - 1)), rel=1e-9)
    assert single_energy(dims, 1.0, 1.0) == pytest.approx(e, rel=1e-12)


def test_amplitude_minimizes_at_level_power():
    dims = SpaceDims(4, 3, 1)
    K = 2.5
    model = ConstantModel(dims, K)
    c0 = K ** (-(dims.N - 2) / 2)
    h = 1e-5

    def I(c):
        return energy(one(dims, amplitudes=(c,)), model)

    d = (I(c0 * (1 + h)) - I(c0 * (1 - h))) / (2 * h * c0)
    assert abs(d) < 1e-8 * abs(I(c0)) / c0
    # the excess vanishes for the consistent amplitude: U solves the constant-K problem
    assert abs(energy_excess(one(dims, levels=(K,)), model)) < 1e-12


def test_two_bubble_deficit_follows_eps12():
    dims = SpaceDims(4, 3, 1)
    model = ConstantModel(dims, 1.0)
    lams = (10.0, 20.0, 40.0, 80.0)
    eps, vals = [], []
    for lam in lams:
        cfg = ladder_config(dims, lam)
        eps.append(cfg.eps12)
        vals.append(-energy_excess(unit_ansatz(cfg), model))
    assert loglog_slope(eps, vals) == pytest.approx(1.0, abs=0.05)
    assert vals[-1] / (c_nk(dims) * theta_closed(dims) * eps[-1]) == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("dims", [SpaceDims(4, 3, 1), SpaceDims(3, 2, 1)], ids=str)
def test_gradient_matches_finite_differences(dims):
    model = ConstantModel(dims, 1.0)
    eta2 = np.zeros(dims.h)
    eta2[0] = 1.0

    def ans(l1, e1):
        return ConcentrationAnsatz((Bubble(dims, e1, l1), Bubble(dims, eta2, 4.0)))

    e1 = np.zeros(dims.h)
    g = energy_gradient(ans(5.0, e1), model)
    h = 1e-4
    fd = (energy(ans(5.0 + h, e1), model) - energy(ans(5.0 - h, e1), model)) / (2 * h)
    assert g.dlam[0] == pytest.approx(fd, rel=1e-5)
    for l in range(dims.h):
        d = np.zeros(dims.h)
        d[l] = h
        fd = (energy(ans(5.0, e1 + d), model) - energy(ans(5.0, e1 - d), model)) / (2 * h)
        assert g.deta[0][l] == pytest.approx(fd, rel=1e-5, abs=1e-9 * abs(g.deta[0][0]))


def test_energy_and_gradient_shares_value():
    dims = SpaceDims(4, 3, 1)
    a = unit_ansatz(ladder_config(dims, 6.0))
    model = ConstantModel(dims, 1.0)
    val, g = energy_and_gradient(a, model)
    assert val == pytest.approx(energy_excess(a, model), rel=1e-8)
    assert g.dlam[0] == pytest.approx(g.dlam[1], rel=1e-7)


def test_anchored_frames_agree_with_absolute_centres():
    land = symmetric_landscape().with_epsilon(1e-2)
    dims = land.dims
    bubbles = (Bubble(dims, [-1.0 + 0.01], 30.0), Bubble(dims, [1.0], 25.0))
    plain = ConcentrationAnsatz(bubbles, levels=(1.0, 1.0))
    anchored = ConcentrationAnsatz(bubbles, levels=(1.0, 1.0), anchors=([-1.0], [1.0]),
                                   offsets=([0.01], [0.0]))
    assert energy_excess(anchored, land) == pytest.approx(energy_excess(plain, land), rel=1e-7)
    ga, gp = energy_gradient(anchored, land), energy_gradient(plain, land)
    assert np.allclose(ga.dlam, gp.dlam, rtol=1e-6)
    assert np.allclose(np.ravel(ga.deta), np.ravel(gp.deta), rtol=1e-6)


@pytest.mark.parametrize("dims", [SpaceDims(3, 2, 1), SpaceDims(4, 2, 2), SpaceDims(5, 3, 2)],
                         ids=str)
@pytest.mark.parametrize("method", ["laplacian", "stable"])
def test_single_bubble_strong_residual(dims, method):
    sup, l2 = strong_residual(one(dims, lam=2.0), ConstantModel(dims, 1.0), method=method)
    assert sup < 1e-10 and l2 < 1e-10


@pytest.mark.parametrize("dims", [SpaceDims(3, 2, 1), SpaceDims(5, 3, 2)], ids=str)
def test_strong_residual_detects_small_amplitude_error(dims):
    # the rounding floor must not hide a genuine 1e-9 defect
    sup, l2 = strong_residual(one(dims, lam=2.0, amplitudes=(1 + 1e-9,)), ConstantModel(dims, 1.0))
    assert sup > 1e-9 and l2 > 1e-9


def test_f_proxy_single_bubble():
    land = symmetric_landscape()
    dims = land.dims
    a = one(dims, eta=np.array([-1.0]), lam=50.0, levels=(1.0,))
    assert f_epsilon_norm_proxy(a, land.with_epsilon(0.0)) < 1e-12
    eps = [1e-2, 1e-3, 1e-4]
    vals = [f_epsilon_norm_proxy(a, land.with_epsilon(e)) for e in eps]
    assert loglog_slope(eps, vals) == pytest.approx(1.0, abs=0.05)


def test_pohozaev_vanishes_for_constant_curvature():
    dims = SpaceDims(4, 3, 1)
    a = unit_ansatz(ladder_config(dims, 5.0))
    assert pohozaev_integral(a, ConstantModel(dims, 1.0)) == 0.0


def test_grid_validation():
    with pytest.raises(DomainError):
        GridSpec(n=4)
    with pytest.raises(DomainError):
        GridSpec(inner=1.0, outer=0.5)
    with pytest.raises(DomainError):
        strong_residual(one(SpaceDims(4, 3, 1)), method="other")


def test_sweep_report_epsilon_rows():
    text = sweep_report(symmetric_landscape(), epsilons=[1e-2, 3e-3, 1e-3], header=["demo"])
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    assert lines[0].split(",") == SWEEP_COLUMNS
    rows = [[float(v) for v in l.split(",")] for l in lines[1:]]
    assert len(rows) == 3
    sup = [r[SWEEP_COLUMNS.index("res_sup")] for r in rows]
    assert sup[0] > sup[1] > sup[2]
    assert text.startswith("# demo\n")


def test_sweep_report_records_failures():
    text = sweep_report(symmetric_landscape(), epsilons=[0.5, 1e-2])
    assert "# param 0.5 failed: DomainError" in text
    with pytest.raises(DomainError):
        sweep_report(symmetric_landscape())
