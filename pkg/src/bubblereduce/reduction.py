"""The finite-dimensional reduced problem.

Two routes to a two-bubble configuration:

* perturbative curvature ``phi = 1 + eps K``: the balance between the
  bubble interaction and the flatness terms gives a 2x2 root problem in
  rescaled rates ``t_j``, certified by a Brouwer degree;
* curvature with two strict local maxima at distance ``s``: the reduced
  energy is minimized over a box of rescaled rates and centre shifts.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .constants import b1_closed, compute_constants, leading_bracket, theta_closed
from .errors import (AdmissibilityError, CertificateError, ConvergenceError, DomainError,
                     InconclusiveDegreeError, SeparationError)
from .model_core import (Bubble, MaxPointModel, PerturbativeLandscape, PerturbativeModel,
                         model_to_dict)

__all__ = [
    "ReducedSystem", "ConcentrationAnsatz", "BoundaryRootWarning", "l_epsilon",
    "l_epsilon_exponent", "theorem24_exponents", "theorem24_scales", "reduced_residual",
    "log_root", "newton_solve", "winding_degree", "g_value", "solve_theorem23",
    "moment_integral", "theorem24_leading_t",
    "solve_theorem24", "single_peak_shadow", "reduced_system_for",
]


class BoundaryRootWarning(UserWarning):
    """The reduced root lies on (or outside) the box boundary."""


# ---------------------------------------------------------------------------
# scaling laws


def l_epsilon_exponent(gamma1: float, gamma2: float, N: int) -> float:
    """``e`` with ``L_eps = eps^e``."""
    den = 0.5 * (N - 2) * (gamma1 + gamma2) - gamma1 * gamma2
    if not den > 0:
        raise DomainError(f"(N-2)(g1+g2)/2 - g1 g2 = {den} must be positive")
    return -gamma1 * gamma2 / den


def l_epsilon(gamma1: float, gamma2: float, N: int, epsilon: float) -> float:
    """``L_eps = eps^(-g1 g2 / ((N-2)(g1+g2)/2 - g1 g2))``."""
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    return float(epsilon) ** l_epsilon_exponent(gamma1, gamma2, N)


def theorem24_exponents(gamma1: float, gamma2: float, N: int) -> tuple:
    """Exponents ``(e1, e2)`` with ``L_j = s^(e_j)`` for two maxima at distance s."""
    den = gamma1 * gamma2 - 0.5 * (gamma1 + gamma2) * (N - 2)
    if not den > 0:
        raise DomainError(f"g1 g2 - (g1+g2)(N-2)/2 = {den} must be positive")
    return (N - 2) * gamma2 / den, (N - 2) * gamma1 / den


def theorem24_scales(gamma1: float, gamma2: float, N: int, s: float) -> tuple:
    if not s > 0:
        raise DomainError("separation must be positive")
    e1, e2 = theorem24_exponents(gamma1, gamma2, N)
    return float(s) ** e1, float(s) ** e2


# ---------------------------------------------------------------------------
# the reduced root problem


@dataclass(frozen=True)
class ReducedSystem:
    """``f_j(t) = t_j^(-gamma_j) - c_j (t1 t2)^(-(N-2)/2)`` on ``[m1, m2]^2``.

    ``box=None`` picks ``[r_min/8, 8 r_max]`` around the exact root.
    """

    gamma1: float
    gamma2: float
    N: int
    c1: float
    c2: float
    box: tuple | None = None

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0):
            raise AdmissibilityError("c_j > 0 is required; it holds exactly when g > 0 at both points")
        if not (self.gamma1 > 0 and self.gamma2 > 0):
            raise DomainError("gamma_j must be positive")
        l_epsilon_exponent(self.gamma1, self.gamma2, self.N)
        if self.box is None:
            r = log_root(self)
            object.__setattr__(self, "box", (float(min(r)) / 8.0, float(max(r)) * 8.0))
        m1, m2 = (float(v) for v in self.box)
        if not 0 < m1 < m2:
            raise DomainError("box must satisfy 0 < m1 < m2")
        object.__setattr__(self, "box", (m1, m2))

    @property
    def m(self) -> float:
        return 0.5 * (self.N - 2)

    def with_box(self, m1, m2) -> "ReducedSystem":
        return ReducedSystem(self.gamma1, self.gamma2, self.N, self.c1, self.c2, (m1, m2))

    def __call__(self, t1, t2):
        return reduced_residual(self, t1, t2)

    def jacobian(self, t1, t2) -> np.ndarray:
        m = self.m
        g1, g2 = self.gamma1, self.gamma2
        pw = (t1 * t2) ** (-m)
        return np.array([
            [-g1 * t1 ** (-g1 - 1) + self.c1 * m * pw / t1, self.c1 * m * pw / t2],
            [self.c2 * m * pw / t1, -g2 * t2 ** (-g2 - 1) + self.c2 * m * pw / t2],
        ])


def reduced_residual(sys: ReducedSystem, t1, t2):
    """``(f1, f2)``; arrays broadcast."""
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    if np.any(t1 <= 0) or np.any(t2 <= 0):
        raise DomainError("t_j must be positive")
    pw = (t1 * t2) ** (-sys.m)
    f1 = t1 ** (-sys.gamma1) - sys.c1 * pw
    f2 = t2 ** (-sys.gamma2) - sys.c2 * pw
    if f1.ndim == 0:
        return float(f1), float(f2)
    return f1, f2


def log_root(sys: ReducedSystem) -> tuple:
    """Exact root: in ``x = log t`` the system is linear."""
    m = 0.5 * (sys.N - 2)
    M = np.array([[m - sys.gamma1, m], [m, m - sys.gamma2]])
    x = np.linalg.solve(M, [math.log(sys.c1), math.log(sys.c2)])
    return float(math.exp(x[0])), float(math.exp(x[1]))


def _scaled(sys: ReducedSystem, t):
    """``r_j = f_j t_j^gamma_j``; it does not decay as ``t`` grows."""
    f = np.array(reduced_residual(sys, *t))
    return f * t ** np.array([sys.gamma1, sys.gamma2]), f


def _scaled_jacobian(sys: ReducedSystem, t) -> np.ndarray:
    m = sys.m
    t1, t2 = t
    a1 = sys.c1 * t1 ** (sys.gamma1 - m) * t2 ** (-m)
    a2 = sys.c2 * t2 ** (sys.gamma2 - m) * t1 ** (-m)
    return np.array([[-(sys.gamma1 - m) * a1 / t1, m * a1 / t2],
                     [m * a2 / t1, -(sys.gamma2 - m) * a2 / t2]])


def newton_solve(sys: ReducedSystem, tol: float = 1e-12, max_iter: int = 100,
                 max_halvings: int = 50) -> tuple:
    """Damped Newton from the symmetric closed form with the mean gamma.

    Steps and damping use the scaled residual ``f_j t_j^gamma_j``, since
    ``f`` itself decays at large ``t`` and would accept far-off points;
    convergence requires both the scaled and the plain residual below ``tol``.
    """
    gbar = 0.5 * (sys.gamma1 + sys.gamma2)
    cbar = math.sqrt(sys.c1 * sys.c2)
    t0 = cbar ** (1.0 / (sys.N - 2 - gbar)) if sys.N - 2 - gbar != 0 else 1.0
    t = np.array([t0, t0])
    trace = []
    r, f = _scaled(sys, t)
    for it in range(max_iter):
        err = float(np.max(np.abs(r)))
        trace.append((it, float(t[0]), float(t[1]), err))
        if err < tol and float(np.max(np.abs(f))) < tol:
            break
        step = np.linalg.solve(_scaled_jacobian(sys, t), -r)
        alpha = 1.0
        for _ in range(max_halvings):
            cand = t + alpha * step
            if np.all(cand > 0):
                rc, fc = _scaled(sys, cand)
                if np.max(np.abs(rc)) < err:
                    break
            alpha *= 0.5
        else:
            raise ConvergenceError("Newton line search failed to reduce the residual", trace)
        t, r, f = cand, rc, fc
    else:
        raise ConvergenceError(f"Newton did not reach residual {tol:g}", trace)
    m1, m2 = sys.box
    if not (m1 < t[0] < m2 and m1 < t[1] < m2):
        warnings.warn(f"reduced root {tuple(t)} is not strictly inside the box {sys.box}",
                      BoundaryRootWarning, stacklevel=2)
    return float(t[0]), float(t[1])


def winding_degree(sys: ReducedSystem, box=None, initial: int = 64, max_depth: int = 40,
                   max_angle: float = math.pi / 4) -> int:
    """Brouwer degree of ``(f1, f2)`` on the box via the boundary winding number.

    Each boundary edge is subdivided until consecutive image points subtend
    less than ``max_angle``.  A zero on the boundary (or a segment that
    cannot be resolved) raises :class:`InconclusiveDegreeError`.
    """
    m1, m2 = sys.box if box is None else box
    if not 0 < m1 < m2:
        raise DomainError("box must satisfy 0 < m1 < m2")
    corners = [(m1, m1), (m2, m1), (m2, m2), (m1, m2), (m1, m1)]

    def image(p):
        f = np.array(reduced_residual(sys, p[0], p[1]))
        scale = p[0] ** (-sys.gamma1) + p[1] ** (-sys.gamma2)
        if np.hypot(*f) <= 1e-13 * scale:
            raise InconclusiveDegreeError(f"reduced map vanishes on the box boundary near {p}")
        return f

    def ang(a, b):
        return math.atan2(a[0] * b[1] - a[1] * b[0], a[0] * b[0] + a[1] * b[1])

    total = 0.0
    for a, b in zip(corners[:-1], corners[1:]):
        a = np.array(a, dtype=float)
        b = np.array(b, dtype=float)
        # geometric spacing along edges resolves the t^-gamma blow-up near m1
        ts = np.linspace(0.0, 1.0, initial + 1)
        pts = [a + (b - a) * x for x in ts]
        stack = [(pts[i], pts[i + 1], 0) for i in range(len(pts) - 1)][::-1]
        cache = {}

        def img(p):
            key = (float(p[0]), float(p[1]))
            if key not in cache:
                cache[key] = image(p)
            return cache[key]

        while stack:
            p, q, depth = stack.pop()
            d = ang(img(p), img(q))
            if abs(d) < max_angle:
                total += d
                continue
            if depth >= max_depth:
                raise InconclusiveDegreeError("boundary image could not be resolved; adjust the box")
            mid = 0.5 * (p + q)
            stack.append((mid, q, depth + 1))
            stack.append((p, mid, depth + 1))
    return int(round(total / (2.0 * math.pi)))


# ---------------------------------------------------------------------------
# the ansatz


@dataclass(frozen=True)
class ConcentrationAnsatz:
    """``u = sum_j amplitude_j U_j`` with the correction term set to zero.

    When ``levels`` is given the amplitudes are ``level^((2-N)/2)``: each
    bubble is then an exact solution of the limiting problem with constant
    curvature equal to its level, which the energy and residual code
    exploits to avoid cancellation.  A single bubble is accepted for
    diagnostics.

    ``anchors`` and ``offsets`` optionally store each centre as
    ``anchor_j + offset_j`` with the offset kept separately.  Once
    ``1/lambda`` approaches the spacing of doubles near ``|anchor_j|`` the
    absolute ``eta`` no longer resolves the bubble; integrals then work in
    a frame attached to the anchor and use the offset directly.
    """

    bubbles: tuple
    amplitudes: tuple = None
    model: object = None
    epsilon: float | None = None
    levels: tuple | None = None
    certificates: dict = field(default_factory=dict, compare=False)
    anchors: tuple | None = field(default=None, compare=False)
    offsets: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        bubbles = tuple(self.bubbles)
        object.__setattr__(self, "bubbles", bubbles)
        if not 1 <= len(bubbles) <= 2:
            raise DomainError("an ansatz holds one or two bubbles")
        if len({b.dims for b in bubbles}) != 1:
            raise DomainError("bubbles must share dims")
        N = bubbles[0].dims.N
        if self.levels is not None:
            levels = tuple(float(v) for v in self.levels)
            if len(levels) != len(bubbles) or any(not v > 0 for v in levels):
                raise DomainError("one positive level per bubble is required")
            object.__setattr__(self, "levels", levels)
            amps = tuple(v ** (0.5 * (2 - N)) for v in levels)
            if self.amplitudes is not None and not np.allclose(self.amplitudes, amps, rtol=1e-12):
                raise DomainError("amplitudes disagree with levels")
            object.__setattr__(self, "amplitudes", amps)
        elif self.amplitudes is None:
            object.__setattr__(self, "amplitudes", tuple(1.0 for _ in bubbles))
        amps = tuple(float(a) for a in self.amplitudes)
        if len(amps) != len(bubbles) or any(not a > 0 for a in amps):
            raise DomainError("one positive amplitude per bubble is required")
        object.__setattr__(self, "amplitudes", amps)
        h = bubbles[0].dims.h
        if self.anchors is None:
            if self.offsets is not None:
                raise DomainError("offsets need anchors")
            return
        anchors = tuple(np.asarray(a, dtype=float).reshape(h) for a in self.anchors)
        if len(anchors) != len(bubbles):
            raise DomainError("one anchor per bubble is required")
        if self.offsets is None:
            offsets = tuple(b.eta - a for b, a in zip(bubbles, anchors))
        else:
            offsets = tuple(np.asarray(o, dtype=float).reshape(h) for o in self.offsets)
            if len(offsets) != len(bubbles):
                raise DomainError("one offset per bubble is required")
        for b, a, o in zip(bubbles, anchors, offsets):
            tol = 1e-12 * max(1.0, float(np.linalg.norm(a)))
            if np.linalg.norm(b.eta - (a + o)) > tol:
                raise DomainError("bubble centre disagrees with anchor + offset")
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "offsets", offsets)

    @property
    def dims(self):
        return self.bubbles[0].dims

    def local_centres(self):
        """``(anchor_j, offset_j)`` pairs; the anchor is ``eta_j`` when none was given."""
        if self.anchors is None:
            return [(b.eta, np.zeros_like(b.eta)) for b in self.bubbles]
        return list(zip(self.anchors, self.offsets))

    def to_dict(self) -> dict:
        out = {
            "bubbles": [{"eta": b.eta.tolist(), "lambda": b.lam} for b in self.bubbles],
            "amplitudes": list(self.amplitudes),
            "certificates": dict(self.certificates),
        }
        if self.levels is not None:
            out["levels"] = list(self.levels)
        if self.epsilon is not None:
            out["epsilon"] = self.epsilon
        if self.model is not None:
            out["model"] = model_to_dict(self.model)
        if self.anchors is not None:
            out["anchors"] = [a.tolist() for a in self.anchors]
            out["offsets"] = [o.tolist() for o in self.offsets]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# flatness-point route (phi = 1 + eps K)


def g_value(pt: PerturbativeModel) -> float:
    """``pi1/k sum(xi) + pi2/h sum(a)`` from the constants module."""
    dims = pt.dims
    c = compute_constants(dims, pt.gamma)
    return c.pi1 / dims.k * float(np.sum(pt.xi)) + c.pi2 / dims.h * float(np.sum(pt.a))


def _points(model) -> tuple:
    if isinstance(model, PerturbativeLandscape):
        pts = model.points
    else:
        pts = tuple(model)
    if len(pts) != 2 or not all(isinstance(p, PerturbativeModel) for p in pts):
        raise DomainError("the perturbative route needs exactly two flatness points")
    return pts


def reduced_system_for(model, convention: str = "exact", box=None) -> ReducedSystem:
    """``c_j = -b1 |d|^(2-N) / ((N-2)/2 * bracket_j)`` for a two-point model."""
    p1, p2 = _points(model)
    dims = p1.dims
    for j, p in enumerate((p1, p2), start=1):
        g = g_value(p)
        if not g > 0:
            raise AdmissibilityError(
                f"point {j} violates the admissibility condition g > 0: g = {g:.6g}")
    d = float(np.linalg.norm(p1.center - p2.center))
    N = dims.N
    b1 = b1_closed(dims)
    cs = []
    for j, p in enumerate((p1, p2), start=1):
        br = leading_bracket(dims, p.gamma, p.xi, p.a, convention)
        if not br > 0:
            raise AdmissibilityError(f"point {j}: flatness bracket {br:.6g} must be positive")
        cs.append(-b1 * d ** (2 - N) / (0.5 * (N - 2) * br))
    return ReducedSystem(p1.gamma, p2.gamma, N, cs[0], cs[1], box)


def solve_theorem23(model, epsilon: float, convention: str = "exact", mu: float = 0.5,
                    box=None) -> ConcentrationAnsatz:
    """Two-bubble ansatz at the reduced root for ``phi = 1 + eps K``."""
    land = model if isinstance(model, PerturbativeLandscape) else PerturbativeLandscape(tuple(model))
    p1, p2 = _points(land)
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    sys = reduced_system_for(land, convention, box)
    t1, t2 = newton_solve(sys)
    deg = winding_degree(sys)
    if deg != -1:
        raise CertificateError(f"Brouwer degree {deg} != -1 on box {sys.box}")
    L = l_epsilon(p1.gamma, p2.gamma, p1.dims.N, epsilon)
    lam1 = t1 * L ** (1.0 / p1.gamma)
    lam2 = t2 * L ** (1.0 / p2.gamma)
    if min(lam1, lam2) <= 1.0 / mu:
        raise DomainError(f"epsilon={epsilon} too large: lambda = ({lam1:.4g}, {lam2:.4g}) "
                          f"must exceed 1/mu = {1.0 / mu:g}")
    f = reduced_residual(sys, t1, t2)
    certs = {"degree": deg, "residual_sup": float(max(abs(f[0]), abs(f[1]))),
             "t": [t1, t2], "c": [sys.c1, sys.c2], "L_epsilon": L, "box": list(sys.box)}
    bubbles = (Bubble(p1.dims, p1.center, lam1), Bubble(p1.dims, p2.center, lam2))
    return ConcentrationAnsatz(bubbles, (1.0, 1.0), land.with_epsilon(epsilon), float(epsilon),
                               levels=(1.0, 1.0), certificates=certs)


def single_peak_shadow(pt: PerturbativeModel, convention: str = "exact") -> dict:
    """Sign check behind the single-peak non-existence argument.

    Without a second bubble the lambda-equation reduces to
    ``bracket * eps / lam^gamma = 0``, which has no positive root whenever
    the bracket is non-zero.
    """
    br = leading_bracket(pt.dims, pt.gamma, pt.xi, pt.a, convention)
    return {"bracket": br, "has_positive_root": br == 0.0}


# ---------------------------------------------------------------------------
# maximum-point route


def moment_integral(dims, gamma: float, spec=None) -> float:
    """``int |x|^gamma U_{0,1}^p / |y|``, the single-bubble moment of the curvature gap."""
    from .quadrature import QuadratureSpec, integrate_cyl

    b = Bubble(dims, np.zeros(dims.h), 1.0)
    p = dims.p

    def f(s, t):
        return (s * s + t * t) ** (0.5 * gamma) * b.profile_power(s, t * t, p) / s

    return integrate_cyl(f, dims, [np.zeros(dims.h)], spec or QuadratureSpec(1e-10, 0.0)).value


def theorem24_leading_t(model: MaxPointModel, pair=(0, 1)) -> tuple:
    """Minimizer of the leading-order reduced energy in ``t_j = lambda_j / L_j``.

    With bubbles at the maximum points the excess energy is, to leading
    order, ``sum_j q_j a_j^p M(gamma_j) lambda_j^(-gamma_j) / p -
    a_1 a_2 C Theta eps12``, where ``a_j = K_j^((2-N)/2)`` and
    ``M`` is :func:`moment_integral`.  In units of ``(L_1 L_2 s^2)^(-(N-2)/2)``
    this depends on ``t`` only.
    """
    from .model_core import c_nk

    j1, j2 = pair
    dims = model.dims
    N = dims.N
    p = dims.p
    m = 0.5 * (N - 2)
    gs = (model.gamma[j1], model.gamma[j2])
    s = float(np.linalg.norm(model.centers[j1] - model.centers[j2]))
    L = theorem24_scales(gs[0], gs[1], N, s)
    norm = (L[0] * L[1] * s * s) ** (-m)
    amps = [model.K[j] ** (0.5 * (2 - N)) for j in (j1, j2)]
    alpha = [model.q[j] * a ** p * moment_integral(dims, g) * Lj ** (-g) / p / norm
             for j, a, g, Lj in zip((j1, j2), amps, gs, L)]
    beta = amps[0] * amps[1] * c_nk(dims) * theta_closed(dims)

    def f(x):
        e = [math.exp(-g * xi) for g, xi in zip(gs, x)]
        tail = beta * math.exp(-m * (x[0] + x[1]))
        val = alpha[0] * e[0] + alpha[1] * e[1] - tail
        grad = np.array([-gs[0] * alpha[0] * e[0] + m * tail, -gs[1] * alpha[1] * e[1] + m * tail])
        return val, grad

    # the tail is flat and slightly negative, so seed the polish from a grid
    xs = np.linspace(-8.0, 8.0, 65)
    X1, X2 = np.meshgrid(xs, xs, indexing="ij")
    vals = (alpha[0] * np.exp(-gs[0] * X1) + alpha[1] * np.exp(-gs[1] * X2)
            - beta * np.exp(-m * (X1 + X2)))
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    res = minimize(f, np.array([xs[i], xs[j]]), jac=True, method="L-BFGS-B",
                   bounds=[(-8.0, 8.0)] * 2)
    return math.exp(res.x[0]), math.exp(res.x[1])


def solve_theorem24(model: MaxPointModel, pair=(0, 1), beta=(0.1, 10.0), mu: float = 0.5,
                    n_starts: int = 3, seed: int = 0, spec=None, zeta_cap: float = 100.0
                    ) -> ConcentrationAnsatz:
    """Minimize the reduced energy over ``lambda_j in [beta1 L_j, beta2 L_j]``.

    Variables are ``log t_j`` and ``zeta_j = L_j (eta_j - center_j)``; the
    centre shift is capped at ``min(mu L_j, zeta_cap)`` in ``zeta`` units.
    A minimizer on the lambda boundary widens the box once, then raises
    :class:`SeparationError`.
    """
    from .residual import energy_and_gradient

    if not isinstance(model, MaxPointModel):
        raise DomainError("the maximum-point route needs a MaxPointModel")
    j1, j2 = pair
    dims = model.dims
    h = dims.h
    N = dims.N
    c1, c2 = model.centers[j1], model.centers[j2]
    g1, g2 = model.gamma[j1], model.gamma[j2]
    s = float(np.linalg.norm(c1 - c2))
    L = theorem24_scales(g1, g2, N, s)
    levels = (model.K[j1], model.K[j2])
    centers = (c1, c2)
    norm = (L[0] * L[1] * s * s) ** (-0.5 * (N - 2))
    if isinstance(model, MaxPointModel) and (j1, j2) != (0, 1):
        raise DomainError("levels are indexed by model centre; use pair=(0, 1)")

    def unpack(x):
        lams = (math.exp(x[0]) * L[0], math.exp(x[1]) * L[1])
        offs = (x[2:2 + h] / L[0], x[2 + h:2 + 2 * h] / L[1])
        bubbles = (Bubble(dims, c1 + offs[0], lams[0]), Bubble(dims, c2 + offs[1], lams[1]))
        return ConcentrationAnsatz(bubbles, model=model, levels=levels, anchors=centers,
                                   offsets=offs)

    def fun(x):
        ans = unpack(x)
        val, g = energy_and_gradient(ans, model, spec)
        val = val / norm
        grad = np.empty_like(x)
        grad[0] = g.dlam[0] * ans.bubbles[0].lam / norm
        grad[1] = g.dlam[1] * ans.bubbles[1].lam / norm
        grad[2:2 + h] = g.deta[0] / L[0] / norm
        grad[2 + h:] = g.deta[1] / L[1] / norm
        return val, grad

    rng = np.random.default_rng(seed)
    t_lead = theorem24_leading_t(model, pair)
    x_lead = np.log(np.clip(t_lead, beta[0], beta[1]))
    b1, b2 = beta
    for attempt in range(2):
        zc = [min(mu * L[0], zeta_cap), min(mu * L[1], zeta_cap)]
        bounds = ([(math.log(b1), math.log(b2))] * 2 + [(-zc[0], zc[0])] * h
                  + [(-zc[1], zc[1])] * h)
        best = None
        for k in range(n_starts):
            x0 = np.zeros(2 + 2 * h)
            x0[:2] = np.clip(x_lead, math.log(b1), math.log(b2))
            if k > 0:
                x0[:2] += rng.uniform(-0.5, 0.5, size=2)
                x0[2:] = rng.normal(scale=0.1, size=2 * h)
                x0[:2] = np.clip(x0[:2], math.log(b1), math.log(b2))
            res = minimize(fun, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                           options={"maxiter": 400, "ftol": 1e-11, "gtol": 1e-8})
            if best is None or res.fun < best.fun:
                best = res
        lo, hi = math.log(b1), math.log(b2)
        on_edge = any(min(best.x[i] - lo, hi - best.x[i]) < 1e-6 for i in (0, 1))
        if not on_edge:
            break
        b1, b2 = b1 / 10.0, b2 * 10.0
    else:
        raise SeparationError(f"minimizer stays on the lambda boundary at s={s:g}; "
                              "increase the separation")
    ans = unpack(best.x)
    inter = [float(np.linalg.norm(o) * b.lam) for b, o in zip(ans.bubbles, ans.offsets)]
    certs = {"separation": s, "L": list(L), "t": [math.exp(best.x[0]), math.exp(best.x[1])],
             "t_leading": list(t_lead), "beta": [b1, b2],
             "reduced_energy": float(best.fun * norm),
             "eta_interiority": inter, "interior": all(v <= 10.0 for v in inter),
             "optimizer_success": bool(best.success)}
    return ConcentrationAnsatz(ans.bubbles, model=model, levels=levels, certificates=certs,
                               anchors=ans.anchors, offsets=ans.offsets)
