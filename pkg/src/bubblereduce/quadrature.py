"""Adaptive cubature for cylindrically symmetric integrands on R^N = R^k x R^h.

Every integral in the package is cylindrical in ``y`` and depends on ``z``
only through its distance to one point, or through a component along an
axis plus a perpendicular radius.  The integrals therefore reduce to
2-D or 3-D weighted integrals over products of half-lines and lines.

Each semi-infinite coordinate is written as ``x0 + sigma * exp(u)`` and the
log-variable ``u`` is compactified by the rational map
``u = uc + L * v / (1 - v**2)`` with ``v`` in ``(-1, 1)``.  Algebraic decay
in the physical variable becomes super-exponential decay in ``v`` so the
whole line is covered with no truncation parameter.  The compactified box
is refined adaptively with a tensor Gauss-Kronrod (7, 15) rule; the
embedded Gauss rule gives an error estimate per axis, and boxes are split
along the axis that contributes most.

Evaluation is vectorized over batches of boxes, and the final sums use
``math.fsum`` so the returned numbers do not depend on summation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import betaln, gammaln

from .errors import DomainError, ToleranceError

# Gauss-Kronrod 7/15 abscissae (positive half) and weights.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_W = np.zeros(15)
GAUSS_W[[1, 3, 5]] = _WG[:3]
GAUSS_W[[9, 11, 13]] = _WG[2::-1]
GAUSS_W[7] = _WG[3]

# Points farther than this (in log units) from a piece centre are deep in
# the tails; non-finite integrand values there are treated as zero.
_TAIL_GUARD = 45.0


class QuadResult(NamedTuple):
    value: float
    error: float


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and refinement limits for :func:`integrate_cyl`.

    With ``norm="l1"`` the relative tolerance is measured against the
    integral of ``|f|``; use it for integrals that vanish by symmetry.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-14
    max_depth: int = 30
    compactification: str = "rational"
    max_boxes: int = 400_000
    norm: str = "value"

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise DomainError("rel_tol must be positive")
        if self.abs_tol < 0:
            raise DomainError("abs_tol must be non-negative")
        if self.max_depth < 1:
            raise DomainError("max_depth must be at least 1")
        if self.compactification != "rational":
            raise DomainError(f"unknown compactification {self.compactification!r}")
        if self.norm not in ("value", "l1"):
            raise DomainError("norm must be 'value' or 'l1'")

    def with_(self, **kw) -> "QuadratureSpec":
        return replace(self, **kw)


DEFAULT_SPEC = QuadratureSpec()


# ---------------------------------------------------------------------------
# One-dimensional pieces


@dataclass(frozen=True)
class Piece:
    """Map ``v -> x0 + sigma*exp(uc + L*v/(1-v^2))`` on ``[va, vb]``."""

    x0: float
    sigma: float
    uc: float
    L: float
    va: float
    vb: float
    breaks: tuple = ()

    def v_of_u(self, u):
        w = (np.asarray(u, dtype=float) - self.uc) / self.L
        return 2.0 * w / (1.0 + np.sqrt(1.0 + 4.0 * w * w))


def _log_piece(x0, sigma, uc, features, half=False, L=3.0, spacing=2.5):
    """A log-compactified piece with breakpoints at the given log-features.

    ``half=True`` restricts to ``u <= uc`` (a finite segment ending at
    distance ``exp(uc)`` from ``x0``).
    """
    piece = Piece(float(x0), float(sigma), float(uc), L, -1.0, 0.0 if half else 1.0)
    feats = sorted(float(f) for f in features if np.isfinite(f))
    hi = uc if half else (max(feats) if feats else uc) + 8.0
    lo = (min(feats) if feats else uc) - 8.0
    if half:
        feats = [f for f in feats if f < uc]
    pts = sorted(set([lo] + feats + ([] if half else [hi])))
    us = []
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, int(math.ceil((b - a) / spacing)))
        us.extend(a + (b - a) * i / n for i in range(n))
    us.append(pts[-1])
    vs = sorted(set(float(piece.v_of_u(u)) for u in us))
    vs = [v for v in vs if piece.va < v < piece.vb]
    return Piece(piece.x0, piece.sigma, piece.uc, L, piece.va, piece.vb, tuple(vs))


def radial_axis(scales: Sequence[float]) -> list:
    """Pieces covering ``(0, inf)`` for a radial variable."""
    logs = [math.log(s) for s in scales]
    uc = 0.5 * (min(logs) + max(logs))
    return [_log_piece(0.0, 1.0, uc, logs)]


def line_axis(points: Sequence[float], scales: Sequence[float]) -> list:
    """Pieces covering the real line with log-refinement at each point.

    Between consecutive points the segment is cut at the midpoint and each
    half is parameterized by log-distance to its own endpoint.
    """
    pts = sorted(set(float(p) for p in points))
    logs = [math.log(s) for s in scales]
    merged = [pts[0]]
    for p in pts[1:]:
        if p - merged[-1] > 1e-15 * max(1.0, abs(p)):
            merged.append(p)
    pts = merged
    far = logs + [math.log(max(pts[-1] - pts[0], min(scales)))] if len(pts) > 1 else logs
    pieces = [_log_piece(pts[0], -1.0, 0.5 * (min(far) + max(far)), far)]
    for a, b in zip(pts[:-1], pts[1:]):
        half = 0.5 * (b - a)
        uc = math.log(half)
        pieces.append(_log_piece(a, 1.0, uc, logs, half=True))
        pieces.append(_log_piece(b, -1.0, uc, logs, half=True))
    pieces.append(_log_piece(pts[-1], 1.0, 0.5 * (min(far) + max(far)), far))
    return pieces


def _piece_intervals(p: Piece):
    edges = [p.va, *p.breaks, p.vb]
    return [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


# ---------------------------------------------------------------------------
# Adaptive tensor-product engine


def _map_nodes(lo, hi, params):
    """Map GK nodes of each box into physical coordinates for one axis.

    Returns physical coordinates, Jacobians (including GK half-widths) and
    the log-offsets from the piece centres, all of shape (B, 15).
    """
    x0, sg, uc, L = params
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    v = mid[:, None] + half[:, None] * NODES[None, :]
    one_m = 1.0 - v * v
    du = L[:, None] * v / one_m
    u = np.clip(uc[:, None] + du, -700.0, 700.0)
    x = x0[:, None] + sg[:, None] * np.exp(u)
    with np.errstate(over="ignore", divide="ignore"):
        logjac = u + np.log(L[:, None] * (1.0 + v * v)) - 2.0 * np.log(one_m)
        jac = np.exp(np.minimum(logjac, 700.0)) * half[:, None]
    return x, jac, np.abs(du)


# Upper bound on integrand nodes (boxes * 15^d * components) per call of f;
# larger batches are split so integrand temporaries stay in the tens of MB.
_CHUNK_NODES = 2_000_000


def _eval_boxes(f, lo, hi, params, ncomp=None):
    """Kronrod values and per-axis |K - G| estimates for a batch of boxes.

    Returned arrays carry a trailing component axis of length
    ``ncomp or 1``: values and l1 masses have shape (B, C), errors (B, d, C).
    """
    d = lo.shape[1]
    per_box = 15 ** d * (ncomp or 1)
    step = max(1, _CHUNK_NODES // per_box)
    if lo.shape[0] <= step:
        return _eval_chunk(f, lo, hi, params, ncomp)
    parts = [_eval_chunk(f, lo[i:i + step], hi[i:i + step], [p[i:i + step] for p in params], ncomp)
             for i in range(0, lo.shape[0], step)]
    return tuple(np.concatenate([q[k] for q in parts]) for k in range(3))


def _eval_chunk(f, lo, hi, params, ncomp=None):
    d = lo.shape[1]
    C = ncomp or 1
    xs, jacs, offs = [], [], []
    for ax in range(d):
        x, j, o = _map_nodes(lo[:, ax], hi[:, ax], [p[:, ax] for p in params])
        xs.append(x)
        jacs.append(j)
        offs.append(o)
    B = lo.shape[0]
    shapes = []
    for ax in range(d):
        shp = [B] + [1] * d
        shp[ax + 1] = 15
        shapes.append(shp)
    args = [xs[ax].reshape(shapes[ax]) for ax in range(d)]
    with np.errstate(all="ignore"):
        raw = np.asarray(f(*args), dtype=float)
    if ncomp is None:
        vals = np.broadcast_to(raw, (B,) + (15,) * d)[..., None].copy()
    else:
        vals = np.moveaxis(np.broadcast_to(raw, (C, B) + (15,) * d), 0, -1).copy()
    cshapes = [shp + [1] for shp in shapes]

    def deep_mask():
        deep = np.zeros(vals.shape, dtype=bool)
        for ax in range(d):
            deep |= (offs[ax] > _TAIL_GUARD).reshape(cshapes[ax])
        return deep

    bad = ~np.isfinite(vals)
    if bad.any():
        deep = deep_mask()
        if np.any(bad & ~deep):
            idx = np.argwhere(bad & ~deep)[0]
            pt = [float(xs[ax][idx[0], idx[ax + 1]]) for ax in range(d)]
            raise DomainError(f"integrand not finite at interior point {pt}")
        vals[bad] = 0.0
    with np.errstate(all="ignore"):
        for ax in range(d):
            vals = vals * jacs[ax].reshape(cshapes[ax])
    bad = ~np.isfinite(vals)
    if bad.any():
        if np.any(bad & ~deep_mask()):
            raise DomainError("weighted integrand overflowed away from the tails")
        vals[bad] = 0.0
    # Kronrod tensor value, then Gauss along each axis with Kronrod elsewhere
    kron = vals
    l1 = np.abs(vals)
    for ax in range(d):
        kron = np.tensordot(kron, KRONROD_W, axes=([1], [0]))
        l1 = np.tensordot(l1, KRONROD_W, axes=([1], [0]))
    kron = kron.reshape(B, C)
    l1 = l1.reshape(B, C)
    errs = np.empty((B, d, C))
    for ax in range(d):
        t = vals
        for bx in range(d):
            w = GAUSS_W if bx == ax else KRONROD_W
            t = np.tensordot(t, w, axes=([1], [0]))
        errs[:, ax, :] = np.abs(kron - t.reshape(B, C))
    return kron, errs, l1


def adaptive_cubature(f: Callable, axes: Sequence[list], spec: QuadratureSpec = DEFAULT_SPEC,
                      ncomp: int | None = None) -> QuadResult:
    """Integrate ``f(x_1, ..., x_d)`` over a product of piecewise-mapped axes.

    ``f`` must broadcast over array arguments.  Axis Jacobians are applied
    here; any density weights are the caller's responsibility.  With
    ``ncomp`` set, ``f`` returns ``ncomp`` stacked components (leading axis);
    they share one partition, each must meet its own tolerance, and the
    result fields are arrays.
    """
    d = len(axes)
    per_axis = []
    for pieces in axes:
        rows = []
        for p in pieces:
            for a, b in _piece_intervals(p):
                rows.append((a, b, p.x0, p.sigma, p.uc, p.L))
        per_axis.append(np.array(rows))
    grids = np.meshgrid(*[np.arange(len(r)) for r in per_axis], indexing="ij")
    combos = np.stack([g.ravel() for g in grids], axis=1)
    lo = np.stack([per_axis[ax][combos[:, ax], 0] for ax in range(d)], axis=1)
    hi = np.stack([per_axis[ax][combos[:, ax], 1] for ax in range(d)], axis=1)
    params = [np.stack([per_axis[ax][combos[:, ax], c] for ax in range(d)], axis=1)
              for c in (2, 3, 4, 5)]
    depth = np.zeros(lo.shape[0], dtype=int)
    val, errs, l1 = _eval_boxes(f, lo, hi, params, ncomp)

    while True:
        comp_err = errs.sum(axis=(0, 1))
        scale = l1.sum(axis=0) if spec.norm == "l1" else np.abs(val.sum(axis=0))
        target = np.maximum(spec.rel_tol * scale, spec.abs_tol)
        if np.all(comp_err <= target):
            break
        safe = np.where(target > 0, target, np.finfo(float).tiny)
        nerrs = errs / safe
        err = nerrs.sum(axis=(1, 2))
        worst = int(np.argmax(comp_err / safe))
        splittable = depth < spec.max_depth
        if not splittable.any() or lo.shape[0] > spec.max_boxes:
            raise ToleranceError(
                f"adaptive cubature stalled at error {comp_err[worst]:.3e} > {target[worst]:.3e}",
                math.fsum(val[:, worst]), float(comp_err[worst]))
        order = np.argsort(-np.where(splittable, err, -1.0), kind="stable")
        cum = np.cumsum(err[order])
        need = float(np.sum(np.maximum(comp_err / safe - 0.5, 0.0)))
        n_sel = int(np.searchsorted(cum, need) + 1)
        n_sel = min(n_sel, int(splittable.sum()), 4096)
        sel = order[:n_sel]
        sel = sel[splittable[sel]]
        if sel.size == 0:
            raise ToleranceError(
                f"adaptive cubature stalled at error {comp_err[worst]:.3e} > {target[worst]:.3e}",
                math.fsum(val[:, worst]), float(comp_err[worst]))
        ax = np.argmax(nerrs[sel].sum(axis=2), axis=1)
        rows = np.arange(sel.size)
        slo, shi = lo[sel].copy(), hi[sel].copy()
        mid = 0.5 * (slo[rows, ax] + shi[rows, ax])
        lo1, hi1 = slo.copy(), shi.copy()
        hi1[rows, ax] = mid
        lo2, hi2 = slo.copy(), shi.copy()
        lo2[rows, ax] = mid
        nlo = np.concatenate([lo1, lo2])
        nhi = np.concatenate([hi1, hi2])
        nparams = [np.concatenate([p[sel], p[sel]]) for p in params]
        nval, nerr_new, nl1 = _eval_boxes(f, nlo, nhi, nparams, ncomp)
        keep = np.ones(lo.shape[0], dtype=bool)
        keep[sel] = False
        lo = np.concatenate([lo[keep], nlo])
        hi = np.concatenate([hi[keep], nhi])
        params = [np.concatenate([p[keep], q]) for p, q in zip(params, nparams)]
        depth = np.concatenate([depth[keep], np.repeat(depth[sel] + 1, 2)])
        val = np.concatenate([val[keep], nval])
        l1 = np.concatenate([l1[keep], nl1])
        errs = np.concatenate([errs[keep], nerr_new])
    values = np.array([math.fsum(val[:, c]) for c in range(val.shape[1])])
    errors = errs.sum(axis=(0, 1))
    if ncomp is None:
        return QuadResult(float(values[0]), float(errors[0]))
    return QuadResult(values, errors)


# ---------------------------------------------------------------------------
# Cylindrical front end


def sphere_measure(n: int) -> float:
    """Measure of the unit sphere S^{n-1} in R^n (so ``sphere_measure(1) == 2``)."""
    if n < 1:
        raise DomainError("sphere_measure needs n >= 1")
    return 2.0 * math.exp(0.5 * n * math.log(math.pi) - gammaln(0.5 * n))


def integrate_cyl(f: Callable, dims, centers: Sequence = (), spec: QuadratureSpec | None = None,
                  *, axis=None, scales: Sequence[float] = (1.0,),
                  ncomp: int | None = None) -> QuadResult:
    """Integrate a cylindrical integrand over R^N with all weights included.

    Radial mode (at most one centre and no ``axis``): ``f(s, t)`` with
    ``s = |y|`` and ``t = |z - c|``; the measure is
    ``w_k s^(k-1) w_h t^(h-1) ds dt``.

    Axial mode (two centres, or ``axis`` given): ``z = c0 + zp*e + tp*u``
    where ``c0`` is the first centre (or the origin), ``e`` the unit axis
    and ``u`` ranges over unit vectors orthogonal to ``e``.  The integrand
    is ``f(s, zp)`` when ``h == 1`` and ``f(s, zp, tp)`` otherwise, with
    measure ``w_k s^(k-1) [w_{h-1} tp^(h-2)] ds dzp dtp``.  Extra breakpoints
    along the axis can be passed as further centres.

    ``scales`` lists the length scales at which the integrand has
    structure (typically ``1/lambda`` for each bubble); they seed the
    initial partition.  ``ncomp`` is passed to :func:`adaptive_cubature`
    for stacked integrands.
    """
    spec = spec or DEFAULT_SPEC
    k, h = dims.k, dims.h
    wk = sphere_measure(k)
    centers = [np.atleast_1d(np.asarray(c, dtype=float)) for c in centers]
    for c in centers:
        if c.shape != (h,):
            raise DomainError(f"centre {c} does not have {h} components")
    scales = [float(s) for s in scales]
    if any(not s > 0 for s in scales):
        raise DomainError("scales must be positive")

    if axis is None and len(centers) <= 1:
        wh = sphere_measure(h)
        s_axis = radial_axis(scales)
        t_axis = radial_axis(scales)

        def g(s, t):
            return f(s, t) * (wk * wh) * s ** (k - 1) * t ** (h - 1)

        return adaptive_cubature(g, [s_axis, t_axis], spec, ncomp)

    frame = axial_frame(centers, axis, h)
    positions = [float(np.dot(c - frame.origin, frame.axis)) for c in centers] or [0.0]
    extent = max(positions) - min(positions)
    sc = scales + ([extent] if extent > 0 else [])
    s_axis = radial_axis(sc)
    z_axis = line_axis(positions, scales)
    if h == 1:
        def g(s, zp):
            return f(s, zp) * wk * s ** (k - 1)

        return adaptive_cubature(g, [s_axis, z_axis], spec, ncomp)
    whm = sphere_measure(h - 1)

    def g3(s, zp, tp):
        return f(s, zp, tp) * (wk * whm) * s ** (k - 1) * tp ** (h - 2)

    return adaptive_cubature(g3, [s_axis, z_axis, radial_axis(sc)], spec, ncomp)


@dataclass(frozen=True)
class AxialFrame:
    """Origin and unit direction of the axis used by axial-mode integrals."""

    origin: np.ndarray
    axis: np.ndarray
    perp: np.ndarray | None = field(default=None)

    def z_point(self, zp, tp=0.0, sign=1.0):
        """Absolute z for axial coordinates (needs ``perp`` when h >= 2)."""
        zp = np.asarray(zp, dtype=float)
        z = self.origin + zp[..., None] * self.axis
        if self.perp is not None:
            z = z + (sign * np.asarray(tp, dtype=float))[..., None] * self.perp
        return z


def axial_frame(centers, axis, h) -> AxialFrame:
    """Axis through the first centre, along ``axis`` or towards the second centre."""
    origin = centers[0] if centers else np.zeros(h)
    if axis is None:
        direction = centers[1] - centers[0]
        nrm = float(np.linalg.norm(direction))
        if nrm == 0.0:
            direction = np.eye(h)[0]
        else:
            direction = direction / nrm
    else:
        direction = np.atleast_1d(np.asarray(axis, dtype=float))
        direction = direction / np.linalg.norm(direction)
    perp = None
    if h == 2:
        perp = np.array([-direction[1], direction[0]])
    return AxialFrame(origin=np.array(origin, dtype=float), axis=direction, perp=perp)


# ---------------------------------------------------------------------------
# Beta primitives


def beta_integral_s(m: float, n: float) -> float:
    """``int_0^inf s^m / (1+s)^n ds = B(m+1, n-m-1)``."""
    if not m + 1 > 0:
        raise DomainError(f"beta_integral_s diverges at 0: need m+1 > 0, got m={m}")
    if not n - m - 1 > 0:
        raise DomainError(f"beta_integral_s diverges at infinity: need m+1 < n, got m={m}, n={n}")
    return math.exp(betaln(m + 1.0, n - m - 1.0))


def beta_integral_t(a: float, n: float) -> float:
    """``int_0^inf t^(a-1) / (1+t^2)^n dt = B(a/2, n-a/2) / 2``."""
    if not a > 0:
        raise DomainError(f"beta_integral_t diverges at 0: need a > 0, got a={a}")
    if not a < 2 * n:
        raise DomainError(f"beta_integral_t diverges at infinity: need a < 2n, got a={a}, n={n}")
    return 0.5 * math.exp(betaln(0.5 * a, n - 0.5 * a))


@dataclass(frozen=True)
class RecurrenceReport:
    """Relative discrepancies of the three reduction formulas.

    ``printed_5_2`` keeps the discrepancy of the variant whose right-hand
    side uses exponent ``n`` instead of ``n + 1``; that variant is not an
    identity and is excluded from :attr:`max_rel`.
    """

    m: float
    n: float
    discrepancies: dict
    printed_5_2: float = float("nan")

    @property
    def max_rel(self) -> float:
        vals = [v for v in self.discrepancies.values() if v is not None]
        return max(vals) if vals else 0.0


def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b))


def check_recurrences(m: float, n: float) -> RecurrenceReport:
    """Evaluate both sides of the three reduction formulas for Beta-type integrals.

    * ``int s^m/(1+s)^(n+1) = (n-m-1)/n * int s^m/(1+s)^n``
    * ``int s^(m+1)/(1+s)^(n+1) = (m+1)/(n-m-1) * int s^m/(1+s)^(n+1)``
    * ``int t^(m-2)/(1+t^2)^n = (2n-m-1)/(2(n-1)) * int t^(m-2)/(1+t^2)^(n-1)``

    The third needs ``1 < m`` for convergence at 0; when ``m <= 1`` it is
    reported as ``None`` rather than failing the whole report.
    """
    if not 0 < m < n - 1:
        raise DomainError(f"check_recurrences needs 0 < m < n-1, got m={m}, n={n}")
    S = beta_integral_s
    T = beta_integral_t
    out = {
        "5.1": _rel(S(m, n + 1), (n - m - 1) / n * S(m, n)),
        "5.2": _rel(S(m + 1, n + 1), (m + 1) / (n - m - 1) * S(m, n + 1)),
    }
    if m > 1:
        out["5.3"] = _rel(T(m - 1, n), (2 * n - m - 1) / (2 * (n - 1)) * T(m - 1, n - 1))
    else:
        out["5.3"] = None
    printed = _rel(S(m + 1, n + 1), (m + 1) / (n - m - 1) * S(m, n))
    return RecurrenceReport(m, n, out, printed)
