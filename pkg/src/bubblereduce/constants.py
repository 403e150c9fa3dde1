"""Interaction constants of the two-bubble expansion, computed two ways.

Every constant is a weighted integral over R^N of a rational function of
``|y|`` and ``|z|``.  Substituting ``t = (1 + s) tau`` splits each one into a
product of Beta-type integrals, which gives the ``closed`` route; the
``quadrature`` route integrates the defining expression directly.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np

from .errors import DomainError
from .model_core import SpaceDims, c_nk, coordinate_average_weight
from .quadrature import QuadratureSpec, beta_integral_s as S, beta_integral_t as T
from .quadrature import integrate_cyl, sphere_measure

TABLE_SPEC = QuadratureSpec(rel_tol=1e-10, abs_tol=0.0)

NEGATIVE = ("b1", "b2", "b3", "pi1", "pi2")
POSITIVE = ("b4", "A", "Theta", "A1", "A2", "D")


def omega_pair(dims: SpaceDims) -> float:
    return sphere_measure(dims.k) * sphere_measure(dims.h)


def _check_gamma(dims, gamma, upper, what):
    if not 0.0 < gamma < upper:
        raise DomainError(f"{what} needs 0 < gamma < {upper:g}, got gamma={gamma}")


# ---------------------------------------------------------------------------
# closed forms


def A_closed(dims: SpaceDims) -> float:
    """``A = int U_{0,1}^p / |y|``."""
    N, k, h = dims.as_tuple()
    return c_nk(dims) * omega_pair(dims) * S(k - 2, 2 * N - 2 - h) * T(h, N - 1)


def theta_closed(dims: SpaceDims) -> float:
    """``Theta = int dx / (|y| [(1+|y|)^2 + |z|^2]^(N/2))``."""
    N, k, h = dims.as_tuple()
    return omega_pair(dims) * S(k - 2, N - h) * T(h, 0.5 * N)


def b1_closed(dims: SpaceDims, omegas: bool = True) -> float:
    N, k, h = dims.as_tuple()
    pref = -(k * k - 2 + k * (h - 1) + h) * N / (2.0 * k * (k + 1))
    w = omega_pair(dims) if omegas else 1.0
    return pref * w * S(k - 2, N - h) * T(h, 0.5 * (N + 2))


def b2_closed(dims: SpaceDims, gamma: float) -> float:
    """Closed form of ``int |y|^g (1-|x|^2) / (|y| [(1+|y|)^2+|z|^2]^N)``."""
    N, k, h = dims.as_tuple()
    _check_gamma(dims, gamma, N - 2, "b2")
    return (-2.0 * gamma / (N - gamma - 1) * omega_pair(dims)
            * S(gamma + k - 2, 2 * N - h - 1) * T(h, N))


def b2_printed_literal(dims: SpaceDims, gamma: float) -> float:
    """Alternative printed expression for b2; disagrees with its integral unless gamma = 1."""
    N, k, h = dims.as_tuple()
    _check_gamma(dims, gamma, N - 2, "b2")
    return (-(2 * N + 2 * k - 2) * omega_pair(dims) / ((2 * N - h - 1) * (2 * N - h - 2))
            * S(gamma + k - 2, 2 * N - h - 2) * T(h, N))


def b3_closed(dims: SpaceDims, gamma: float) -> float:
    """Closed form of ``int |z|^g (1-|x|^2) / (|y| [(1+|y|)^2+|z|^2]^N)``."""
    N, k, h = dims.as_tuple()
    _check_gamma(dims, gamma, N - 2, "b3")
    return (-2.0 * gamma / (N - gamma + k - 2) * omega_pair(dims)
            * S(k - 2, N - gamma + k - 2) * T(gamma + h, N))


def b4_closed(dims: SpaceDims, gamma: float) -> float:
    N, k, h = dims.as_tuple()
    _check_gamma(dims, gamma, N, "b4")
    return (c_nk(dims) * (N - 2) * gamma / h * omega_pair(dims)
            * S(k - 2, 2 * N - gamma - h) * T(gamma + h, N))


def A1_closed(dims: SpaceDims) -> float:
    N, k, h = dims.as_tuple()
    M = 2 * N - h
    t0, t2, t4 = T(h, N + 1), T(h + 2, N + 1), T(h + 4, N + 1)
    s0, s1, s2 = S(k - 2, M), S(k - 2, M - 1), S(k - 2, M - 2)
    core = t0 * (4 * s0 - 4 * s1 + s2) - 2 * t2 * (2 * s1 - s2) + t4 * s2
    return N * (N - 2) / 4.0 * c_nk(dims) * omega_pair(dims) * core


def A2_closed(dims: SpaceDims) -> float:
    N, k, h = dims.as_tuple()
    return N * (N - 2) * c_nk(dims) / h * omega_pair(dims) * S(k - 2, 2 * N - h) * T(h + 2, N + 1)


def leading_bracket(dims: SpaceDims, gamma: float, xi, a, convention: str = "exact") -> float:
    """Coefficient multiplying ``(N-2) C / (2 lam^(gamma+1))`` in the curvature term.

    ``exact`` integrates the flatness polynomial as written, with
    ``sum(xi) |y|^gamma`` and coordinatewise ``|z_l|^gamma``; ``averaged``
    uses the 1/k and 1/h weights, which coincide with ``exact`` only when
    gamma = 2 (or k = h = 1).
    """
    xi_sum = float(np.sum(xi))
    a_sum = float(np.sum(a))
    b2 = b2_closed(dims, gamma)
    b3 = b3_closed(dims, gamma)
    if convention == "exact":
        return b2 * xi_sum + coordinate_average_weight(dims.h, gamma) * b3 * a_sum
    if convention == "averaged":
        return b2 * xi_sum / dims.k + b3 * a_sum / dims.h
    raise DomainError(f"unknown convention {convention!r}")


# ---------------------------------------------------------------------------
# quadrature of the defining integrals


def _radial(f, dims, spec):
    return integrate_cyl(f, dims, spec=spec).value


def A_quad(dims, spec=TABLE_SPEC):
    C = c_nk(dims)
    e = dims.N - 1
    return _radial(lambda s, t: C / (s * ((1 + s) ** 2 + t * t) ** e), dims, spec)


def theta_quad(dims, spec=TABLE_SPEC):
    e = 0.5 * dims.N
    return _radial(lambda s, t: 1.0 / (s * ((1 + s) ** 2 + t * t) ** e), dims, spec)


def b1_quad(dims, spec=TABLE_SPEC):
    N = dims.N
    e = 0.5 * (N + 2)
    return 0.5 * N * _radial(lambda s, t: (1 - s * s - t * t) / (s * ((1 + s) ** 2 + t * t) ** e),
                             dims, spec)


def _b23_quad(dims, gamma, which, spec):
    N = dims.N

    def f(s, t):
        w = s ** gamma if which == "y" else t ** gamma
        return w * (1 - s * s - t * t) / (s * ((1 + s) ** 2 + t * t) ** N)

    return _radial(f, dims, spec)


def b2_quad(dims, gamma, spec=TABLE_SPEC):
    _check_gamma(dims, gamma, dims.N - 2, "b2")
    return _b23_quad(dims, gamma, "y", spec)


def b3_quad(dims, gamma, spec=TABLE_SPEC):
    _check_gamma(dims, gamma, dims.N - 2, "b3")
    return _b23_quad(dims, gamma, "z", spec)


def pi_quad(dims, gamma, spec=TABLE_SPEC):
    """``(pi1, pi2)`` from their defining integrals."""
    _check_gamma(dims, gamma, dims.N - 2, "pi1/pi2")
    return _b23_quad(dims, gamma, "y", spec), _b23_quad(dims, gamma, "z", spec)


def b4_quad(dims, gamma, spec=TABLE_SPEC):
    N, h = dims.N, dims.h
    _check_gamma(dims, gamma, N, "b4")
    pref = c_nk(dims) * (N - 2) * gamma / h
    return pref * _radial(lambda s, t: t ** gamma / (s * ((1 + s) ** 2 + t * t) ** N), dims, spec)


def inner_product_constants(dims: SpaceDims, lam: float = 1.0, spec=TABLE_SPEC):
    """``(A1, A2)`` from Dirichlet integrals of the analytic gradients.

    ``A1 = lam^2 <dU/dlam, dU/dlam>`` and ``A2 = lam^-2 <dU/deta_l, dU/deta_l>``;
    both are independent of ``lam``.
    """
    m = dims.m
    h = dims.h
    c0 = float(((dims.N - 2) * (dims.k - 1)) ** m)
    L = float(lam)

    def a1(s, t):
        D = (1 + L * s) ** 2 + L * L * t * t
        g = 1 - L * L * (s * s + t * t)
        pre = m / L * c0 * L ** m
        ds = pre * (-2 * L * L * s * D ** (-m - 1) - (m + 1) * g * D ** (-m - 2) * 2 * L * (1 + L * s))
        dt = pre * (-2 * L * L * t * D ** (-m - 1) - (m + 1) * g * D ** (-m - 2) * 2 * L * L * t)
        return L * L * (ds * ds + dt * dt)

    def a2(s, t):
        D = (1 + L * s) ** 2 + L * L * t * t
        pre = (2 * m * L ** (2 + m) * c0) ** 2
        w2 = t * t / h  # mean of w_l^2 over the sphere |w| = t
        grad2 = (D ** (-2 * m - 2) - 4 * (m + 1) * L * L * w2 * D ** (-2 * m - 3)
                 + (m + 1) ** 2 * w2 * D ** (-2 * m - 4)
                 * (4 * L ** 4 * t * t + 4 * L * L * (1 + L * s) ** 2))
        return pre * grad2 / (L * L)

    return _radial(a1, dims, spec), _radial(a2, dims, spec)


def cross_inner_product(dims: SpaceDims, lam: float = 1.0, spec=TABLE_SPEC) -> float:
    """``<dU/dlam, dU/deta_1>`` for one bubble; vanishes by odd symmetry in z_1."""
    m = dims.m
    c0 = float(((dims.N - 2) * (dims.k - 1)) ** m)
    L = float(lam)
    axis = np.eye(dims.h)[0]

    def f(s, zp, tp=0.0):
        t2 = zp * zp + tp * tp
        D = (1 + L * s) ** 2 + L * L * t2
        g = 1 - L * L * (s * s + t2)
        pl = m / L * c0 * L ** m
        pe = 2 * m * L * L * c0 * L ** m
        # gradient of dU/dlam: radial in (s, |z|); gradient of dU/deta_1
        ls = pl * (-2 * L * L * s * D ** (-m - 1) - (m + 1) * g * D ** (-m - 2) * 2 * L * (1 + L * s))
        lz = pl * (-2 * L * L * D ** (-m - 1) - (m + 1) * g * D ** (-m - 2) * 2 * L * L)  # times z
        es = pe * zp * (-(m + 1)) * D ** (-m - 2) * 2 * L * (1 + L * s)
        ez1 = pe * (D ** (-m - 1) - (m + 1) * zp * D ** (-m - 2) * 2 * L * L * zp)
        ezp = pe * zp * (-(m + 1)) * D ** (-m - 2) * 2 * L * L  # times the perpendicular coordinate
        return ls * es + lz * zp * ez1 + lz * ezp * tp * tp

    # the exact value is 0, so the tolerance is anchored to the Cauchy-Schwarz bound
    bound = math.sqrt(A1_closed(dims) * A2_closed(dims))
    spec = QuadratureSpec(rel_tol=spec.rel_tol, abs_tol=spec.rel_tol * bound)
    if dims.h == 1:
        return integrate_cyl(lambda s, zp: f(s, zp), dims, axis=axis, spec=spec).value
    return integrate_cyl(f, dims, axis=axis, spec=spec).value


# ---------------------------------------------------------------------------
# aggregate


@dataclass(frozen=True)
class AppendixConstants:
    dims: SpaceDims
    gamma: float | None
    A: float
    Theta: float
    pi1: float | None
    pi2: float | None
    b1: float
    b2: float | None
    b3: float | None
    b4: float | None
    A1: float
    A2: float
    D: float | None = None
    provenance: dict = field(default_factory=dict)
    closed: dict = field(default_factory=dict)
    quadrature: dict = field(default_factory=dict)

    def sign_ledger(self) -> dict:
        out = {}
        for name in NEGATIVE + POSITIVE:
            v = getattr(self, name)
            if v is None:
                continue
            out[name] = v < 0 if name in NEGATIVE else v > 0
        return out


_CLOSED = {
    "A": lambda d, g: A_closed(d),
    "Theta": lambda d, g: theta_closed(d),
    "b1": lambda d, g: b1_closed(d),
    "b2": b2_closed,
    "b3": b3_closed,
    "b4": b4_closed,
    "pi1": b2_closed,
    "pi2": b3_closed,
    "A1": lambda d, g: A1_closed(d),
    "A2": lambda d, g: A2_closed(d),
}


def _quad_values(dims, gamma, spec):
    out = {"A": A_quad(dims, spec), "Theta": theta_quad(dims, spec), "b1": b1_quad(dims, spec)}
    out["A1"], out["A2"] = inner_product_constants(dims, spec=spec)
    if gamma is not None:
        for name, fn in (("b2", b2_quad), ("b3", b3_quad), ("b4", b4_quad)):
            try:
                out[name] = fn(dims, gamma, spec)
            except DomainError:
                pass
        try:
            out["pi1"], out["pi2"] = pi_quad(dims, gamma, spec)
        except DomainError:
            pass
    return out


@lru_cache(maxsize=256)
def _compute_cached(dims, gamma, rel_tol):
    spec = QuadratureSpec(rel_tol=rel_tol, abs_tol=0.0)
    closed = {}
    for name, fn in _CLOSED.items():
        try:
            closed[name] = fn(dims, gamma) if (gamma is not None or name in
                                                ("A", "Theta", "b1", "A1", "A2")) else None
        except DomainError:
            closed[name] = None
    closed = {k: v for k, v in closed.items() if v is not None}
    quad = _quad_values(dims, gamma, spec)
    prov = {}
    vals = {}
    for name in set(closed) | set(quad):
        if name in closed and name in quad:
            prov[name] = "both"
            vals[name] = closed[name]
        elif name in closed:
            prov[name] = "closed-form"
            vals[name] = closed[name]
        else:
            prov[name] = "quadrature"
            vals[name] = quad[name]
    return closed, quad, prov, vals


def compute_constants(dims: SpaceDims, gamma: float | None = None, *, rel_tol: float = 1e-10,
                      with_D: bool = False) -> AppendixConstants:
    """All constants for ``(dims, gamma)``; values prefer the closed form when both exist.

    ``with_D`` adds the interaction coefficient D fitted on the lambda ladder
    (provenance ``fit``).
    """
    closed, quad, prov, vals = _compute_cached(dims, None if gamma is None else float(gamma),
                                               rel_tol)
    prov = dict(prov)
    D = None
    if with_D:
        from .interaction import fit_D
        D = fit_D(dims).D
        prov["D"] = "fit"
    return AppendixConstants(
        dims=dims, gamma=gamma, A=vals["A"], Theta=vals["Theta"], pi1=vals.get("pi1"),
        pi2=vals.get("pi2"), b1=vals["b1"], b2=vals.get("b2"), b3=vals.get("b3"),
        b4=vals.get("b4"), A1=vals["A1"], A2=vals["A2"], D=D, provenance=prov,
        closed=dict(closed), quadrature=dict(quad))


def pi_and_g(dims: SpaceDims, gamma: float, xi, a, spec=TABLE_SPEC):
    """``(pi1, pi2, g)`` with ``g = pi1/k sum(xi) + pi2/h sum(a)``."""
    pi1, pi2 = pi_quad(dims, gamma, spec)
    g = pi1 / dims.k * float(np.sum(xi)) + pi2 / dims.h * float(np.sum(a))
    return pi1, pi2, g


# ---------------------------------------------------------------------------
# cross-check table

TABLE_COLUMNS = ["N", "k", "h", "gamma", "name", "closed_form", "quadrature", "rel_diff", "sign_ok"]
TABLE_ORDER = ("A", "Theta", "b1", "b2", "b3", "b4", "pi1", "pi2", "A1", "A2")


@dataclass
class CrossCheckReport:
    rows: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    tol: float = 1e-5

    @property
    def max_rel_diff(self) -> float:
        diffs = [r["rel_diff"] for r in self.rows if r["rel_diff"] is not None]
        return max(diffs) if diffs else 0.0

    @property
    def signs_ok(self) -> bool:
        return all(r["sign_ok"] for r in self.rows)

    @property
    def ok(self) -> bool:
        return not self.errors and self.signs_ok and self.max_rel_diff <= self.tol

    def to_csv(self, header: Iterable[str] = ()) -> str:
        buf = io.StringIO()
        for line in header:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TABLE_COLUMNS)
        for r in self.rows:
            w.writerow([r["N"], r["k"], r["h"], _fmt(r["gamma"]), r["name"], _fmt(r["closed_form"]),
                        _fmt(r["quadrature"]), _fmt(r["rel_diff"]), str(r["sign_ok"]).lower()])
        return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def default_gamma_grid(dims: SpaceDims) -> list:
    """Three interior points of the admissible gamma range (0 < gamma < N-2 when N = 3)."""
    N = dims.N
    lo = 0.0 if N == 3 else 1.0
    hi = N - 2.0
    return [lo + (hi - lo) * f for f in (0.25, 0.5, 0.75)]


DEFAULT_DIMS = (SpaceDims(3, 2, 1), SpaceDims(4, 2, 2), SpaceDims(4, 3, 1), SpaceDims(5, 3, 2))


def cross_check_table(dims_grid=DEFAULT_DIMS, gamma_grid=None, *, tol: float = 1e-5,
                      rel_tol: float = 1e-10, closed_overrides: dict | None = None
                      ) -> CrossCheckReport:
    """Closed form versus quadrature for every constant on a grid.

    ``gamma_grid`` may be a list (used for every dims), a dict keyed by
    ``(N, k, h)``, or None for :func:`default_gamma_grid`.  ``closed_overrides``
    maps a constant name to a replacement closed-form callable ``f(dims, gamma)``
    (used for fault injection in tests).
    """
    report = CrossCheckReport(tol=tol)
    closed_fns = dict(_CLOSED)
    closed_fns.update(closed_overrides or {})
    for dims in dims_grid:
        if gamma_grid is None:
            gammas = default_gamma_grid(dims)
        elif isinstance(gamma_grid, dict):
            gammas = gamma_grid.get(dims.as_tuple(), [])
        else:
            gammas = list(gamma_grid)
        for gamma in gammas:
            try:
                _, quad, _, _ = _compute_cached(dims, float(gamma), rel_tol)
            except (DomainError, ArithmeticError) as exc:
                report.errors.append((dims.as_tuple(), gamma, str(exc)))
                continue
            for name in TABLE_ORDER:
                q = quad.get(name)
                try:
                    c = closed_fns[name](dims, gamma)
                except DomainError as exc:
                    if q is None:
                        continue
                    report.errors.append((dims.as_tuple(), gamma, f"{name}: {exc}"))
                    continue
                if q is None:
                    continue
                rel = abs(c - q) / max(abs(c), abs(q))
                ref = c if c is not None else q
                sign_ok = (ref < 0 and q < 0) if name in NEGATIVE else (ref > 0 and q > 0)
                report.rows.append({"N": dims.N, "k": dims.k, "h": dims.h, "gamma": float(gamma),
                                    "name": name, "closed_form": float(c), "quadrature": float(q),
                                    "rel_diff": rel, "sign_ok": bool(sign_ok)})
    return report



