"""Energy, gradient, linear-form proxy and strong-form residual of an ansatz.

All integrands are assembled so that nothing of order one cancels: each
bubble's self-energy is taken in closed form, and what remains (bubble
interaction plus the curvature deficit ``gap_j = level_j - phi``) is
integrated directly.  This keeps the reduced energy accurate even when it
is forty orders of magnitude below the total.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .constants import A1_closed, A2_closed, A_closed
from .errors import BubbleReduceError, DomainError
from .model_core import ConstantModel, TwoBubbleConfig, as_curvature_model
from .quadrature import QuadratureSpec, axial_frame, integrate_cyl, sphere_measure

__all__ = [
    "energy", "energy_excess", "single_energy", "energy_gradient", "EnergyGradient",
    "f_epsilon_norm_proxy", "strong_residual", "GridSpec", "sweep_report", "unit_ansatz",
    "SWEEP_COLUMNS", "mix_power", "pohozaev_integral", "energy_and_gradient",
]

SWEEP_COLUMNS = ["param", "lambda1", "lambda2", "eps12", "energy", "fnorm_proxy", "res_sup",
                 "res_l2", "pohozaev"]

RESIDUAL_SPEC = QuadratureSpec(rel_tol=1e-9, abs_tol=0.0, norm="l1")


def mix_power(A, B, q):
    """``(A+B)^q - A^q - B^q`` for ``A, B >= 0`` without cancellation."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    big = np.maximum(A, B)
    small = np.minimum(A, B)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(big > 0, small / big, 0.0)
        out = big ** q * (np.expm1(q * np.log1p(r)) - r ** q)
    return np.where(big > 0, out, 0.0)


def unit_ansatz(cfg: TwoBubbleConfig):
    """Two bubbles with amplitude 1 (level 1)."""
    from .reduction import ConcentrationAnsatz

    return ConcentrationAnsatz((cfg.b1, cfg.b2), levels=(1.0, 1.0))


class _Piece:
    """One integration region in a frame attached to an anchor point.

    Coordinates are local: the frame origin is the anchor, the model is
    translated so the anchor sits at zero, and each bubble centre is stored
    as a local vector.  ``cut`` restricts the axial coordinate to one side
    of the mid-plane between two anchors.
    """

    def __init__(self, model, anchor, etas, axis, h, cut=None):
        self.anchor = np.asarray(anchor, dtype=float)
        self.model = model.translated(-self.anchor)
        self.etas = [np.asarray(e, dtype=float) for e in etas]
        self.frame = axial_frame([np.zeros(h)], axis, h)
        e = self.frame.axis
        self.pos = [float(np.dot(v, e)) for v in self.etas]
        self.cut = cut
        self.u = None
        if h >= 3:
            u = np.zeros(h)
            u[int(np.argmin(np.abs(e)))] = 1.0
            u = u - np.dot(u, e) * e
            self.u = u / np.linalg.norm(u)
            for v, ps in zip(self.etas, self.pos):
                if np.linalg.norm(v - ps * e) > 1e-12 * max(1.0, float(np.linalg.norm(v))):
                    raise NotImplementedError("for h >= 3 both bubble centres must lie on one axis")
        pts = [np.zeros(h)] + self.etas + [np.asarray(c, dtype=float) for c in self.model.breakpoints()]
        if cut is not None:
            pts.append(cut[1] * e)
        self.points = pts

    def inside(self, zp):
        if self.cut is None:
            return True
        side, val = self.cut
        return zp <= val if side < 0 else zp >= val

    def z(self, zp, tp, sign):
        if self.u is not None:
            zp = np.asarray(zp, dtype=float)
            return zp[..., None] * self.frame.axis + np.asarray(tp, dtype=float)[..., None] * self.u
        return self.frame.z_point(zp, tp, sign)


class _Field:
    """Bubbles, curvature and integration pieces shared by all integrands.

    With two distinct anchors space is split at the mid-plane between them
    and each half is integrated in the frame of its own anchor, so bubble
    cores stay resolved however large ``lambda`` gets.
    """

    def __init__(self, ansatz, model):
        model = ConstantModel(ansatz.dims, 1.0) if model is None else as_curvature_model(model)
        self.model = model
        self.bubbles = list(ansatz.bubbles)
        self.amps = list(ansatz.amplitudes)
        dims = ansatz.dims
        if model.dims != dims:
            raise DomainError("model and ansatz live on different dims")
        self.dims = dims
        self.h = dims.h
        self.p = dims.p
        self.signs = (1.0, -1.0) if self.h == 2 else (1.0,)
        if ansatz.levels is not None:
            self.levels = list(ansatz.levels)
            self.rho_minus_level = [0.0] * len(self.bubbles)
        else:
            self.levels = [float(model.ref_level(j)) for j in range(len(self.bubbles))]
            self.rho_minus_level = [a ** (2.0 - self.p) - lv for a, lv in zip(self.amps, self.levels)]
        self.level_shift = [lv - float(model.ref_level(j)) for j, lv in enumerate(self.levels)]
        loc = ansatz.local_centres()
        anchors = [a for a, _ in loc]
        offsets = [o for _, o in loc]
        self.scales = [1.0 / b.lam for b in self.bubbles] + list(model.length_scales())
        h = self.h
        if len(loc) == 2 and np.linalg.norm(anchors[1] - anchors[0]) > 0:
            d_vec = anchors[1] - anchors[0]
            d = float(np.linalg.norm(d_vec))
            self.pieces = [
                _Piece(model, anchors[0], [offsets[0], d_vec + offsets[1]], d_vec, h, (-1, 0.5 * d)),
                _Piece(model, anchors[1], [offsets[0] - d_vec, offsets[1]], d_vec, h, (1, -0.5 * d)),
            ]
        else:
            a0 = anchors[0]
            etas = offsets if len(loc) == 1 else [offsets[0], anchors[1] - a0 + offsets[1]]
            axis = None
            if len(etas) == 2 and np.linalg.norm(etas[1] - etas[0]) > 0:
                axis = etas[1] - etas[0]
            else:
                axis = np.eye(h)[0]
                for c in model.breakpoints():
                    dv = np.asarray(c, dtype=float) - a0
                    if np.linalg.norm(dv) > 0:
                        axis = dv
                        break
            self.pieces = [_Piece(model, a0, etas, axis, h)]

    # -- model values, perpendicular-averaged (exact against symmetric factors)
    def phi(self, P, s, zp, tp, sign=1.0):
        if self.h >= 3:
            return P.model.phi_axial(s, zp, tp, P.frame)
        return P.model.phi(s, P.frame.z_point(zp, tp, sign))

    def gap(self, P, j, s, zp, tp, sign=1.0):
        if self.h >= 3:
            g = P.model.gap_axial(j, s, zp, tp, P.frame)
        else:
            g = P.model.gap(j, s, P.frame.z_point(zp, tp, sign))
        return g + self.level_shift[j]

    def rel(self, P, j, zp, tp, sign):
        """Axial and perpendicular components of ``z - eta_j``."""
        if self.h == 2:
            v = P.etas[j]
            return (zp - P.pos[j], sign * tp - float(np.dot(v, P.frame.perp)))
        return (zp - P.pos[j], tp)

    def tau2(self, P, j, zp, tp, sign=1.0):
        a, b = self.rel(P, j, zp, tp, sign)
        return a * a + b * b

    def comps(self, P, s, zp, tp, sign=1.0):
        """``A_j = amp_j U_j`` and ``A_j^(p-1)``."""
        A, Ap1 = [], []
        for j, (a, b) in enumerate(zip(self.amps, self.bubbles)):
            t2 = self.tau2(P, j, zp, tp, sign)
            A.append(a * b.profile(s, t2))
            Ap1.append(a ** (self.p - 1) * b.profile_power(s, t2, self.p - 1))
        return A, Ap1

    def bracket(self, P, s, zp, tp, sign=1.0):
        """``sum_j amp_j U_j^(p-1) - phi u^(p-1)``, i.e. ``-|y|`` times the residual."""
        A, Ap1 = self.comps(P, s, zp, tp, sign)
        out = 0.0
        for j in range(len(A)):
            out = out + (self.rho_minus_level[j] + self.gap(P, j, s, zp, tp, sign)) * Ap1[j]
        if len(A) == 2:
            out = out - self.phi(P, s, zp, tp, sign) * mix_power(A[0], A[1], self.p - 1)
        return out

    def integrate(self, fn, spec, ncomp=None):
        """Sum over pieces of ``int fn(P, s, zp, tp, sign)`` averaged over signs.

        ``fn`` is an integrand already divided by |y|; with ``ncomp`` it
        returns that many components and the result is an array.
        """
        total = 0.0
        for P in self.pieces:
            def g3(s, zp, tp, P=P):
                out = 0.0
                for sg in self.signs:
                    v = fn(P, s, zp, tp, sg)
                    if ncomp is not None:
                        v = np.stack(np.broadcast_arrays(*v))
                    out = out + v
                out = out / len(self.signs)
                if P.cut is not None:
                    out = np.where(P.inside(zp), out, 0.0)
                return out

            if self.h == 1:
                def g(s, zp, g3=g3):
                    return g3(s, zp, 0.0)
            else:
                g = g3
            total = total + integrate_cyl(g, self.dims, P.points, spec, axis=P.frame.axis,
                                          scales=self.scales, ncomp=ncomp).value
        return total


def _rspec(spec):
    return spec or RESIDUAL_SPEC


def single_energy(dims, amplitude: float, level: float, consistent: bool = False) -> float:
    """``(a^2/2 - level a^p/p) int U^p/|y|``."""
    A = A_closed(dims)
    p = dims.p
    if consistent:
        return A * level ** (2 - dims.N) / (2.0 * (dims.N - 1))
    return (0.5 * amplitude ** 2 - level * amplitude ** p / p) * A


def energy_excess(ansatz, model=None, spec: QuadratureSpec | None = None) -> float:
    """Energy minus the closed-form self-energies of the bubbles."""
    F = _Field(ansatz, model)
    p = F.p
    two = len(F.bubbles) == 2

    def fn(P, s, zp, tp, sign):
        A, Ap1 = F.comps(P, s, zp, tp, sign)
        out = 0.0
        for j in range(len(A)):
            out = out + F.gap(P, j, s, zp, tp, sign) * A[j] ** p / p
        if two:
            out = out + A[1] * Ap1[0] - F.phi(P, s, zp, tp, sign) * mix_power(A[0], A[1], p) / p
        return out / s

    return F.integrate(fn, _rspec(spec))


def energy(ansatz, model=None, spec: QuadratureSpec | None = None) -> float:
    """``I(u) = 1/2 int |grad u|^2 - 1/p int phi |u|^p / |y|``."""
    F = _Field(ansatz, model)
    consistent = ansatz.levels is not None
    base = math.fsum(single_energy(F.dims, a, lv, consistent) for a, lv in zip(F.amps, F.levels))
    return base + energy_excess(ansatz, model, spec)


@dataclass(frozen=True)
class EnergyGradient:
    """``dI/dlambda_j`` and ``dI/deta^j`` (each an h-vector)."""

    dlam: tuple
    deta: tuple


def energy_gradient(ansatz, model=None, spec: QuadratureSpec | None = None) -> EnergyGradient:
    """Exact gradient of the energy through the bubble parameters.

    ``dI/dtheta = amp_i int (sum_j amp_j U_j^(p-1) - phi u^(p-1)) dU_i/dtheta / |y|``.
    Perpendicular eta-components vanish by symmetry when h >= 3 (the models
    support that case only with centres on a coordinate axis).
    """
    return energy_and_gradient(ansatz, model, spec)[1]


def energy_and_gradient(ansatz, model=None, spec: QuadratureSpec | None = None):
    """``(energy_excess, EnergyGradient)`` from one shared adaptive partition."""
    F = _Field(ansatz, model)
    p = F.p
    nb = len(F.bubbles)
    two = nb == 2
    axis = F.pieces[0].frame.axis
    perp = F.pieces[0].frame.perp
    n_eta = 2 if F.h == 2 else 1

    def fn(P, s, zp, tp, sign):
        A, Ap1 = F.comps(P, s, zp, tp, sign)
        phi = F.phi(P, s, zp, tp, sign)
        gaps = [F.gap(P, j, s, zp, tp, sign) for j in range(nb)]
        ex = 0.0
        br = 0.0
        for j in range(nb):
            ex = ex + gaps[j] * A[j] ** p / p
            br = br + (F.rho_minus_level[j] + gaps[j]) * Ap1[j]
        if two:
            ex = ex + A[1] * Ap1[0] - phi * mix_power(A[0], A[1], p) / p
            br = br - phi * mix_power(A[0], A[1], p - 1)
        out = [ex / s]
        br = br / s
        for i, b in enumerate(F.bubbles):
            r = F.rel(P, i, zp, tp, sign)
            t2 = r[0] * r[0] + r[1] * r[1]
            out.append(br * b.profile_dlam(s, t2))
            fac = br * b.profile_deta_factor(s, t2)
            for c in range(n_eta):
                out.append(fac * r[c])
        return out

    vals = F.integrate(fn, _rspec(spec), ncomp=1 + nb * (1 + n_eta))
    dlam, deta = [], []
    for i, a in enumerate(F.amps):
        base = 1 + i * (1 + n_eta)
        dlam.append(float(a * vals[base]))
        vec = a * vals[base + 1] * axis
        if n_eta == 2:
            vec = vec + a * vals[base + 2] * perp
        deta.append(np.asarray(vec, dtype=float))
    return float(vals[0]), EnergyGradient(tuple(dlam), tuple(deta))


def pohozaev_integral(ansatz, model=None, spec: QuadratureSpec | None = None) -> float:
    """``int <x - x_P, grad phi> u^p / |y|`` summed over the integration pieces.

    ``x_P`` is the anchor of each piece (the bubble centre unless anchors
    were given), so with two bubbles the dilation field is centred on each
    bubble inside its own half-space.
    """
    F = _Field(ansatz, model)
    p = F.p

    def fn(P, s, zp, tp, sign):
        def pt(ss, z):
            u = 0.0
            for a, b, v in zip(F.amps, F.bubbles, P.etas):
                u = u + a * b.profile(ss, np.sum((z - v) ** 2, axis=-1))
            return P.model.x_dot_grad_phi(ss, z) * u ** p
        if F.h >= 3:
            val = P.model.axial(pt, s, zp, tp, P.frame)
        else:
            val = pt(s, P.frame.z_point(zp, tp, sign))
        return val / s

    return F.integrate(fn, (spec or RESIDUAL_SPEC).with_(norm="l1"))


def f_epsilon_norm_proxy(ansatz, model=None, spec: QuadratureSpec | None = None) -> float:
    """Largest ``|<f_eps, w>| / ||w||`` over the tangent directions of the bubbles."""
    F = _Field(ansatz, model)
    g = energy_gradient(ansatz, model, spec)
    a1 = math.sqrt(A1_closed(F.dims))
    a2 = math.sqrt(A2_closed(F.dims))
    vals = []
    for amp, b, dl, de in zip(F.amps, F.bubbles, g.dlam, g.deta):
        vals.append(abs(dl) / amp / (a1 / b.lam))
        vals.extend(np.abs(de) / amp / (a2 * b.lam))
    return float(max(vals))


# ---------------------------------------------------------------------------
# strong-form residual on a tensor grid


@dataclass(frozen=True)
class GridSpec:
    """Log-spaced tensor grid; ``n`` nodes per axis in total."""

    n: int = 96
    inner: float = 1e-4
    outer: float = 1e4

    def __post_init__(self):
        if self.n < 8:
            raise DomainError("grid needs at least 8 nodes per axis")
        if not 0 < self.inner < self.outer:
            raise DomainError("need 0 < inner < outer")


_EPS = float(np.finfo(float).eps)
# observed worst case is about 9 ulps of the envelope (odd N, fractional powers)
_ROUNDING_ULPS = 32.0


def _merged_offsets(scales, n, inner, outer):
    per = max(4, n // len(scales))
    pts = [np.geomspace(inner * sc, outer * sc, per) for sc in scales]
    return np.unique(np.concatenate(pts))


def _cell(x):
    if x.size == 1:
        return np.ones(1)
    return np.abs(np.gradient(x))


def strong_residual(ansatz, model=None, grid: GridSpec | None = None,
                    method: str = "laplacian") -> tuple:
    """Weighted sup and L2 norms of ``Delta u + phi u^(N/(N-2)) / |y|``.

    The weight is ``|y| (1 + |x|)^2``.  ``method="laplacian"`` sums the
    closed-form Laplacians of the bubbles and sets R to zero where it lies
    within 32 ulps of the magnitudes being cancelled (otherwise the L2 norm
    of pure rounding grows with the grid extent); ``method="stable"`` uses
    ``-Delta U_j = U_j^(p-1)/|y|`` to cancel analytically, which is needed
    once ``lambda`` is large enough that the two terms differ in their
    last digits.
    """
    grid = grid or GridSpec()
    if method not in ("laplacian", "stable"):
        raise DomainError("method must be 'laplacian' or 'stable'")
    F = _Field(ansatz, model)
    k, h = F.dims.k, F.dims.h
    sups, sq = [], 0.0
    for P in F.pieces:
        own = [j for j in range(len(F.bubbles)) if P.inside(P.pos[j])]
        sc = [1.0 / F.bubbles[j].lam for j in own]
        s = _merged_offsets(sc, grid.n, grid.inner, grid.outer)
        off = _merged_offsets(sc, max(4, grid.n // (2 * len(own))) * len(sc), grid.inner, grid.outer)
        zp = np.unique(np.concatenate([np.concatenate([P.pos[j] - off[::-1], [P.pos[j]],
                                                       P.pos[j] + off]) for j in own]))
        if P.cut is not None:
            zp = zp[P.inside(zp)]
        if h == 1:
            tp = np.zeros(1)
        else:
            tp = np.unique(np.concatenate([[0.0], _merged_offsets(sc, grid.n, grid.inner, grid.outer)]))
        S, ZP, TP = np.meshgrid(s, zp, tp, indexing="ij")
        z = P.z(ZP, TP, 1.0)
        phi = P.model.phi(S, z)
        t2s = [np.sum((z - v) ** 2, axis=-1) for v in P.etas]
        if method == "stable":
            R = np.zeros_like(S)
            A = []
            for j, (a, b) in enumerate(zip(F.amps, F.bubbles)):
                A.append(a * b.profile(S, t2s[j]))
                ap1 = a ** (F.p - 1) * b.profile_power(S, t2s[j], F.p - 1)
                gap = P.model.gap(j, S, z) + F.level_shift[j]
                R = R + (F.rho_minus_level[j] + gap) * ap1
            if len(A) == 2:
                R = R - phi * mix_power(A[0], A[1], F.p - 1)
            R = -R / S
        else:
            u = 0.0
            lap = 0.0
            scale = 0.0
            for j, (a, b) in enumerate(zip(F.amps, F.bubbles)):
                u = u + a * b.profile(S, t2s[j])
                lap = lap + a * b.profile_laplacian(S, t2s[j])
                scale = scale + a * b.profile_laplacian_scale(S, t2s[j])
            nonlin = phi * u ** (F.p - 1) / S
            R = lap + nonlin
            # below the rounding envelope of the cancelling terms R is not resolved
            R = np.where(np.abs(R) <= _ROUNDING_ULPS * _EPS * (scale + np.abs(nonlin)), 0.0, R)
        xabs = np.sqrt(S * S + np.sum((P.anchor + z) ** 2, axis=-1))
        Rw = np.abs(R) * S * (1.0 + xabs) ** 2
        vol = (sphere_measure(k) * S ** (k - 1) * _cell(s)[:, None, None]
               * _cell(zp)[None, :, None])
        if h >= 2:
            tw = _cell(tp)
            vol = (vol * sphere_measure(h - 1) * np.where(TP > 0, TP, 0.5 * tp[1]) ** (h - 2)
                   * tw[None, None, :])
        sups.append(float(np.max(Rw)))
        sq += float(np.sum(Rw * Rw * vol))
    return max(sups), math.sqrt(sq)


# ---------------------------------------------------------------------------
# sweeps


def _row_metrics(ans, model, spec):
    from .interaction import pohozaev_diagnostic

    eps12 = float("nan")
    if len(ans.bubbles) == 2:
        eps12 = TwoBubbleConfig(*ans.bubbles).eps12
    en = energy(ans, model, spec)
    fp = f_epsilon_norm_proxy(ans, model, spec)
    sup, l2 = strong_residual(ans, model, method="stable")
    try:
        poh = pohozaev_diagnostic(model, ans, spec)
    except NotImplementedError:
        poh = float("nan")
    lam = [b.lam for b in ans.bubbles] + [float("nan")]
    return [lam[0], lam[1], eps12, en, fp, sup, l2, poh]


def sweep_report(model, epsilons=None, separations=None, spec: QuadratureSpec | None = None,
                 header=(), seed: int = 0, separation_builder=None) -> str:
    """CSV of solved ansatz metrics, one row per epsilon (or separation).

    Rows that fail are reported as ``#`` comment lines and the sweep
    continues.  For separations, ``separation_builder(s)`` must return the
    maximum-point model at distance ``s``.
    """
    from .reduction import solve_theorem23, solve_theorem24

    if (epsilons is None) == (separations is None):
        raise DomainError("give exactly one of epsilons or separations")
    rows, notes = [], []
    params = list(epsilons if epsilons is not None else separations)
    for prm in params:
        try:
            if epsilons is not None:
                ans = solve_theorem23(model, prm)
                mdl = ans.model
            else:
                mdl = separation_builder(prm) if separation_builder else model
                ans = solve_theorem24(mdl, seed=seed, spec=spec)
            rows.append([prm] + _row_metrics(ans, mdl, spec))
        except (BubbleReduceError, NotImplementedError) as exc:
            notes.append(f"# param {prm!r} failed: {type(exc).__name__}: {exc}")
    buf = io.StringIO()
    for line in header:
        buf.write(line if line.startswith("#") else "# " + line)
        buf.write("\n")
    buf.write("# residual: strong form, weight |y|(1+|x|)^2; its decay is a heuristic stand-in "
              "for the Dirichlet norm of the true correction\n")
    for n in notes:
        buf.write(n + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)
