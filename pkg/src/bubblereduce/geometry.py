"""Coordinate chain CR sphere -> Heisenberg group -> Grushin -> Hardy-Sobolev.

Cylindrical functions on the Heisenberg group ``H^n`` depend on ``(|Z|, t)``.
Substituting ``r -> sqrt(r)`` in the radial variable turns the Grushin
Dirichlet energy into a Euclidean one on ``R^(n+1) x R``, at the cost of a
fixed factor ``2 w_{2n} / w_{n+1}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateConfigError, DomainError
from .model_core import Bubble, HeisenbergBubble, SpaceDims
from .quadrature import DEFAULT_SPEC, QuadratureSpec, integrate_cyl, sphere_measure

__all__ = [
    "sphere_measure", "cr_to_heisenberg", "heisenberg_to_cr", "CylFunction", "grushin_to_hs",
    "hs_to_grushin", "curvature_transfer", "dirichlet_norm_heisenberg", "dirichlet_norm_hs",
    "norm_identity_ratio", "norm_identity_constant", "heisenberg_bubble_profile",
    "builtin_profiles",
]


def cr_to_heisenberg(theta):
    """Cayley transform from ``S^(2n+1)`` (minus the south pole) to ``H^n``.

    Returns ``(Z, t)`` with ``Z_j = theta_j/(1+theta_{n+1})`` and
    ``t = Re(i(1 - theta_{n+1})/(1 + theta_{n+1}))``.
    """
    theta = np.asarray(theta, dtype=complex)
    if theta.ndim != 1 or theta.size < 2:
        raise DomainError("theta must be a vector in C^(n+1), n >= 1")
    if abs(np.linalg.norm(theta) - 1.0) > 1e-10:
        raise DomainError("theta must lie on the unit sphere")
    w = theta[-1]
    if abs(1.0 + w) < 1e-14:
        raise DomainError("theta_{n+1} = -1 is the pole of the Cayley transform")
    Z = theta[:-1] / (1.0 + w)
    t = float((1j * (1.0 - w) / (1.0 + w)).real)
    return Z, t


def heisenberg_to_cr(Z, t):
    """Inverse Cayley transform.

    With ``zeta = |Z|^2 - i t`` the last coordinate is
    ``w = (1 - zeta)/(1 + zeta)`` and ``theta_j = Z_j (1 + w)``.
    """
    Z = np.atleast_1d(np.asarray(Z, dtype=complex))
    zeta = float(np.sum(np.abs(Z) ** 2)) - 1j * float(t)
    w = (1.0 - zeta) / (1.0 + zeta)
    return np.concatenate([Z * (1.0 + w), [w]])


@dataclass(frozen=True)
class CylFunction:
    """A profile ``f(r, z)`` with an optional analytic gradient.

    ``grad(r, z)`` returns ``(f_r, f_z)``; when absent, derivatives are taken
    by fourth-order central differences.  ``decay`` is the declared rate
    ``f = O(|x|^-decay)``.  ``m1, m2`` are the dimensions of the radial and
    axial blocks of the space the profile lives on (``m2 == 1`` throughout).
    """

    f: Callable
    m1: int
    m2: int = 1
    decay: float = 1.0
    grad: Callable | None = None
    name: str = "profile"

    def __call__(self, r, z):
        return self.f(r, z)

    def derivatives(self, r, z):
        if self.grad is not None:
            return self.grad(r, z)
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        hr = 1e-3 * np.maximum(r, 1e-3)
        hz = 1e-3 * np.maximum(np.abs(z), 1e-3)
        hr = np.minimum(hr, 0.5 * r) if np.all(r > 0) else hr

        def d(fun, x, hx):
            return (-fun(x + 2 * hx) + 8 * fun(x + hx) - 8 * fun(x - hx) + fun(x - 2 * hx)) / (12 * hx)

        fr = d(lambda rr: self.f(rr, z), r, hr)
        fz = d(lambda zz: self.f(r, zz), z, hz)
        return fr, fz


def grushin_to_hs(psi: CylFunction) -> CylFunction:
    """``v(r, z) = psi(sqrt(r), z)`` on ``R^k x R^h`` with ``k = (m1 + 2)/2``."""
    if psi.m1 % 2:
        raise DomainError(f"Grushin radial dimension m1={psi.m1} must be even")
    k = (psi.m1 + 2) // 2

    def f(r, z):
        return psi.f(np.sqrt(r), z)

    grad = None
    if psi.grad is not None:
        def grad(r, z):
            rr = np.sqrt(r)
            fr, fz = psi.grad(rr, z)
            return fr / (2.0 * rr), fz

    return CylFunction(f, k, psi.m2, 0.5 * psi.decay, grad, psi.name + ":hs")


def hs_to_grushin(v: CylFunction) -> CylFunction:
    """Inverse of :func:`grushin_to_hs`: ``psi(r, z) = v(r^2, z)``."""
    m1 = 2 * v.m1 - 2

    def f(r, z):
        return v.f(np.asarray(r) ** 2, z)

    grad = None
    if v.grad is not None:
        def grad(r, z):
            fr, fz = v.grad(np.asarray(r) ** 2, z)
            return 2.0 * np.asarray(r) * fr, fz

    name = v.name[:-3] if v.name.endswith(":hs") else v.name + ":grushin"
    return CylFunction(f, m1, v.m2, 2.0 * v.decay, grad, name)


def curvature_transfer(Phi: CylFunction) -> CylFunction:
    """``phi(r, z) = Phi(sqrt(r), z) / 4``."""
    out = grushin_to_hs(Phi)

    def f(r, z):
        return 0.25 * Phi.f(np.sqrt(r), z)

    return CylFunction(f, out.m1, out.m2, out.decay, None, Phi.name + ":curv")


def heisenberg_bubble_profile(n: int, s: float = 0.0, lam: float = 1.0) -> CylFunction:
    """``V_{s,lam}`` as a cylindrical profile on ``H^n`` with analytic gradient."""
    hb = HeisenbergBubble(n, s, lam)
    q = hb.Q
    e = 0.25 * (q - 2)

    def f(r, t):
        return hb.profile(r, t)

    def grad(r, t):
        r = np.asarray(r, dtype=float)
        t = np.asarray(t, dtype=float)
        a = 1.0 + lam * lam * r * r
        base = a * a + lam ** 4 * (t - s) ** 2
        v = hb.profile(r, t)
        fr = -e * v / base * (4.0 * a * lam * lam * r)
        ft = -e * v / base * (2.0 * lam ** 4 * (t - s))
        return fr, ft

    return CylFunction(f, 2 * n, 1, float(q - 2), grad, f"V_{n}")


def _power_profile(n: int, power: float = 1.1) -> CylFunction:
    """``(1 + |Z|^4 + t^2)^(-(Q-2)/4 * power)``, a second decaying test profile."""
    q = 2 * n + 2
    e = 0.25 * (q - 2) * power

    def f(r, t):
        return (1.0 + np.asarray(r) ** 4 + np.asarray(t) ** 2) ** (-e)

    def grad(r, t):
        r = np.asarray(r, dtype=float)
        t = np.asarray(t, dtype=float)
        base = 1.0 + r ** 4 + t * t
        v = base ** (-e)
        return -e * v / base * 4.0 * r ** 3, -e * v / base * 2.0 * t

    return CylFunction(f, 2 * n, 1, (q - 2) * power, grad, f"power_{n}")


def builtin_profiles() -> dict:
    """Named profiles available to the CLI ``transform-demo`` command."""
    return {
        "bubble1": heisenberg_bubble_profile(1),
        "bubble2": heisenberg_bubble_profile(2),
        "power1": _power_profile(1),
        "power2": _power_profile(2),
    }


def _check_decay(u: CylFunction, n: int):
    if u.decay < 2 * n:
        raise DomainError(f"declared decay {u.decay} below Q-2 = {2 * n}; Dirichlet energy may diverge")


def dirichlet_norm_heisenberg(u: CylFunction, n: int, spec: QuadratureSpec | None = None,
                              scales=(1.0,)) -> float:
    """``w_{2n} int int (u_r^2 + 4 r^2 u_t^2) r^(2n-1) dr dt``."""
    if u.m1 != 2 * n:
        raise DomainError(f"profile lives on radial dimension {u.m1}, not 2n = {2 * n}")
    _check_decay(u, n)
    dims = SpaceDims(2 * n + 1, 2 * n, 1)

    def integrand(r, t):
        ur, ut = u.derivatives(r, t)
        return ur * ur + 4.0 * r * r * ut * ut

    return integrate_cyl(integrand, dims, axis=[1.0], spec=spec or DEFAULT_SPEC,
                         scales=scales).value


def dirichlet_norm_hs(v: CylFunction, spec: QuadratureSpec | None = None, scales=(1.0,)) -> float:
    """Euclidean Dirichlet energy of a cylindrical profile on ``R^k x R``."""
    dims = SpaceDims(v.m1 + 1, v.m1, 1)

    def integrand(r, t):
        vr, vt = v.derivatives(r, t)
        return vr * vr + vt * vt

    return integrate_cyl(integrand, dims, axis=[1.0], spec=spec or DEFAULT_SPEC,
                         scales=scales).value


def norm_identity_constant(n: int) -> float:
    """``c_n = 2 w_{2n} / w_{n+1}``."""
    return 2.0 * sphere_measure(2 * n) / sphere_measure(n + 1)


def norm_identity_ratio(u: CylFunction, n: int, spec: QuadratureSpec | None = None) -> float:
    """Heisenberg Dirichlet energy of ``u`` over the Euclidean energy of its transform."""
    spec = spec or QuadratureSpec(rel_tol=1e-10)
    num = dirichlet_norm_heisenberg(u, n, spec)
    den = dirichlet_norm_hs(grushin_to_hs(u), spec)
    if den == 0.0:
        raise DegenerateConfigError("transformed profile has zero Dirichlet energy")
    return num / den


def hs_bubble_profile(dims: SpaceDims, lam: float = 1.0) -> CylFunction:
    """Euclidean bubble ``U_{0,lam}`` as a profile in ``(|y|, z)`` (h = 1)."""
    b = Bubble(dims, [0.0], lam)
    return CylFunction(lambda r, z: b.profile(r, np.asarray(z) ** 2), dims.k, 1,
                       float(dims.N - 2), None, "U")


def chain_table(name: str, points) -> list:
    """Rows (r, t, u, v, psi_back) following a built-in profile along the chain."""
    u = builtin_profiles()[name]
    v = grushin_to_hs(u)
    back = hs_to_grushin(v)
    rows = []
    for r, t in points:
        rows.append((r, t, float(u(r, t)), float(v(r * r, t)), float(back(r, t))))
    return rows


def cr_rows(n: int, thetas) -> list:
    rows = []
    for th in thetas:
        Z, t = cr_to_heisenberg(th)
        r = float(np.linalg.norm(Z))
        rows.append((r, t))
    return rows

