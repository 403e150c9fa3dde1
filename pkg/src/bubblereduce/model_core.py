"""Dimensions, bubbles and prescribed-curvature models.

Points of R^N = R^k x R^h are passed in split cylindrical form: ``s = |y|``
(a scalar or array) and ``z`` (shape ``(..., h)``; a bare array is accepted
when ``h == 1``).  All evaluators broadcast over leading array axes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln

from .errors import DegenerateConfigError, DomainError

__all__ = [
    "SpaceDims", "Bubble", "HeisenbergBubble", "PerturbativeModel", "PerturbativeLandscape",
    "MaxPointModel", "ConstantModel", "TwoBubbleConfig", "c_nk", "bubble_eval",
    "bubble_grad", "bubble_laplacian", "heisenberg_bubble_eval", "epsilon_ij",
    "coordinate_average_weight", "smoothstep_cutoff", "model_from_dict", "model_to_dict",
    "load_model",
]


@dataclass(frozen=True)
class SpaceDims:
    """The splitting R^N = R^k x R^h.

    ``cr_n`` marks instances coming from the CR sphere S^(2n+1), for which
    ``k = n + 1``, ``h = 1`` and the homogeneous dimension is ``Q = 2n + 2``.
    """

    N: int
    k: int
    h: int
    cr_n: int | None = None

    def __post_init__(self):
        if self.k < 2 or self.h < 1:
            raise DomainError(f"need k >= 2 and h >= 1, got k={self.k}, h={self.h}")
        if self.N != self.k + self.h:
            raise DomainError(f"N={self.N} is not k+h={self.k + self.h}")
        if self.N < 3:
            raise DomainError("need N >= 3")
        if self.cr_n is not None and (self.k != self.cr_n + 1 or self.h != 1):
            raise DomainError("CR instance needs k = n+1 and h = 1")

    @classmethod
    def of(cls, k: int, h: int) -> "SpaceDims":
        return cls(k + h, k, h)

    @classmethod
    def from_cr(cls, n: int) -> "SpaceDims":
        if n < 1:
            raise DomainError("CR index n must be >= 1")
        return cls(n + 2, n + 1, 1, cr_n=n)

    @property
    def Q(self) -> int | None:
        return None if self.cr_n is None else 2 * self.cr_n + 2

    @property
    def p(self) -> float:
        """Critical exponent 2(N-1)/(N-2)."""
        return 2.0 * (self.N - 1) / (self.N - 2)

    @property
    def m(self) -> float:
        return 0.5 * (self.N - 2)

    def as_tuple(self):
        return (self.N, self.k, self.h)


def c_nk(dims: SpaceDims) -> float:
    """``[(N-2)(k-1)]^(N-1)``."""
    return float(((dims.N - 2) * (dims.k - 1)) ** (dims.N - 1))


def _amp(dims: SpaceDims) -> float:
    return float(((dims.N - 2) * (dims.k - 1)) ** (0.5 * (dims.N - 2)))


def _as_z(z, h):
    z = np.asarray(z, dtype=float)
    if h == 1 and (z.ndim == 0 or z.shape[-1] != 1):
        z = z[..., None]
    if z.shape[-1] != h:
        raise DomainError(f"z must have trailing dimension {h}")
    return z


@dataclass(frozen=True)
class Bubble:
    """``U_{eta,lam}``, a positive solution of ``-Delta U = U^(N/(N-2))/|y|``."""

    dims: SpaceDims
    eta: np.ndarray
    lam: float

    def __post_init__(self):
        eta = np.atleast_1d(np.asarray(self.eta, dtype=float)).copy()
        if eta.shape != (self.dims.h,):
            raise DomainError(f"eta must have {self.dims.h} components")
        if not self.lam > 0:
            raise DomainError("lambda must be positive")
        eta.setflags(write=False)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "lam", float(self.lam))

    def __eq__(self, other):
        return (isinstance(other, Bubble) and self.dims == other.dims
                and self.lam == other.lam and np.array_equal(self.eta, other.eta))

    def __hash__(self):
        return hash((self.dims, self.lam, tuple(self.eta)))

    def moved(self, eta=None, lam=None) -> "Bubble":
        return Bubble(self.dims, self.eta if eta is None else eta,
                      self.lam if lam is None else lam)

    # radial-profile helpers used by the integrands: tau2 = |z - eta|^2
    def profile(self, s, tau2):
        m = self.dims.m
        lam = self.lam
        return _amp(self.dims) * lam ** m / ((1.0 + lam * s) ** 2 + lam * lam * tau2) ** m

    def profile_power(self, s, tau2, q):
        """``U**q`` computed without forming U (keeps tails representable)."""
        m = self.dims.m
        lam = self.lam
        logu = (math.log(_amp(self.dims)) + m * math.log(lam)
                - m * np.log((1.0 + lam * s) ** 2 + lam * lam * tau2))
        return np.exp(q * logu)

    def profile_dlam(self, s, tau2):
        """dU/dlambda; vanishes on the sphere |x - (0,eta)| = 1/lambda."""
        m = self.dims.m
        lam = self.lam
        D = (1.0 + lam * s) ** 2 + lam * lam * tau2
        return m / lam * self.profile(s, tau2) * (1.0 - lam * lam * (s * s + tau2)) / D

    def profile_deta_factor(self, s, tau2):
        """dU/deta_l divided by (z_l - eta_l)."""
        lam = self.lam
        D = (1.0 + lam * s) ** 2 + lam * lam * tau2
        return (self.dims.N - 2) * lam * lam * self.profile(s, tau2) / D

    def profile_laplacian(self, s, tau2):
        """Closed-form ``U_ss + (k-1)/s U_s + Delta_z U``."""
        k, h = self.dims.k, self.dims.h
        m = self.dims.m
        lam = self.lam
        D = (1.0 + lam * s) ** 2 + lam * lam * tau2
        Ds = 2.0 * lam * (1.0 + lam * s)
        grad2 = Ds * Ds + 4.0 * lam ** 4 * tau2
        lin = 2.0 * lam * lam + (k - 1) * Ds / s + 2.0 * lam * lam * h
        return _amp(self.dims) * lam ** m * (m * (m + 1) * grad2 - m * D * lin) / D ** (m + 2)

    def profile_laplacian_scale(self, s, tau2):
        """Sum of the magnitudes of the two terms in :meth:`profile_laplacian`.

        Their difference is the Laplacian, so rounding in it is bounded by a
        few ulps of this scale rather than of the result.
        """
        k, h = self.dims.k, self.dims.h
        m = self.dims.m
        lam = self.lam
        D = (1.0 + lam * s) ** 2 + lam * lam * tau2
        Ds = 2.0 * lam * (1.0 + lam * s)
        grad2 = Ds * Ds + 4.0 * lam ** 4 * tau2
        lin = 2.0 * lam * lam + (k - 1) * Ds / s + 2.0 * lam * lam * h
        return _amp(self.dims) * lam ** m * (m * (m + 1) * grad2 + m * D * lin) / D ** (m + 2)


def bubble_eval(b: Bubble, s, z):
    """``U_{eta,lam}(y, z)`` with ``s = |y|``."""
    z = _as_z(z, b.dims.h)
    tau2 = np.sum((z - b.eta) ** 2, axis=-1)
    return b.profile(np.asarray(s, dtype=float), tau2)


def bubble_grad(b: Bubble, s, z):
    """Analytic ``(dU/dlambda, dU/deta)``; the second has trailing dimension h."""
    z = _as_z(z, b.dims.h)
    diff = z - b.eta
    tau2 = np.sum(diff ** 2, axis=-1)
    s = np.asarray(s, dtype=float)
    dlam = b.profile_dlam(s, tau2)
    deta = b.profile_deta_factor(s, tau2)[..., None] * diff
    return dlam, deta


def bubble_laplacian(b: Bubble, s, z):
    """Euclidean Laplacian of the bubble (away from y = 0)."""
    z = _as_z(z, b.dims.h)
    tau2 = np.sum((z - b.eta) ** 2, axis=-1)
    return b.profile_laplacian(np.asarray(s, dtype=float), tau2)


@dataclass(frozen=True)
class HeisenbergBubble:
    """``V_{s,lam}`` on the Heisenberg group H^n, with ``c_0 = (2n)^n``."""

    n: int
    s: float = 0.0
    lam: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be >= 1")
        if not self.lam > 0:
            raise DomainError("lambda must be positive")

    @property
    def Q(self) -> int:
        return 2 * self.n + 2

    @property
    def c0(self) -> float:
        return float((2 * self.n) ** self.n)

    def profile(self, r, t):
        """Value at ``|Z| = r`` and height ``t``."""
        q = self.Q
        lam = self.lam
        base = (1.0 + lam * lam * np.asarray(r) ** 2) ** 2 + lam ** 4 * (np.asarray(t) - self.s) ** 2
        return self.c0 * lam ** (0.5 * (q - 2)) * base ** (-0.25 * (q - 2))


def heisenberg_bubble_eval(hb: HeisenbergBubble, Z, t):
    """Evaluate at ``(Z, t)``.

    A complex ``Z`` is read as a point of C^n (trailing axis of length n);
    a real ``Z`` is read as the modulus ``|Z|``.
    """
    Z = np.asarray(Z)
    if np.iscomplexobj(Z):
        if Z.shape[-1:] != (hb.n,):
            raise DomainError(f"complex Z must have trailing dimension {hb.n}")
        r = np.sqrt(np.sum(np.abs(Z) ** 2, axis=-1))
    else:
        r = np.abs(Z)
    return hb.profile(r, t)


@dataclass(frozen=True)
class TwoBubbleConfig:
    b1: Bubble
    b2: Bubble

    def __post_init__(self):
        if self.b1.dims != self.b2.dims:
            raise DomainError("bubbles must share dims")

    @property
    def dims(self) -> SpaceDims:
        return self.b1.dims

    @property
    def separation(self) -> float:
        return float(np.linalg.norm(self.b1.eta - self.b2.eta))

    @property
    def eps12(self) -> float:
        return epsilon_ij(self)

    def swapped(self) -> "TwoBubbleConfig":
        return TwoBubbleConfig(self.b2, self.b1)


def epsilon_ij(cfg: TwoBubbleConfig) -> float:
    """``(lam1 lam2 |eta1 - eta2|^2)^((2-N)/2)``."""
    d = cfg.separation
    if d == 0.0:
        raise DegenerateConfigError("epsilon_ij undefined for coincident centres")
    N = cfg.dims.N
    return (cfg.b1.lam * cfg.b2.lam * d * d) ** (0.5 * (2 - N))


# ---------------------------------------------------------------------------
# Curvature models


def coordinate_average_weight(h: int, gamma: float) -> float:
    """Spherical mean of ``|w_1|^gamma / |w|^gamma`` over S^(h-1).

    Integrating ``|z_1|^gamma f(|z|)`` over R^h gives this factor times the
    integral of ``|z|^gamma f(|z|)``.  It equals 1/h only when gamma = 2.
    """
    if h == 1:
        return 1.0
    return math.exp(gammaln(0.5 * h) + gammaln(0.5 * (gamma + 1))
                    - 0.5 * math.log(math.pi) - gammaln(0.5 * (h + gamma)))


def smoothstep_cutoff(r, delta):
    """C^2 cutoff: 1 on [0, delta], 0 beyond 2*delta, and its r-derivative."""
    r = np.asarray(r, dtype=float)
    x = np.clip(r / delta - 1.0, 0.0, 1.0)
    chi = 1.0 - x ** 3 * (10.0 - 15.0 * x + 6.0 * x * x)
    dchi = -30.0 * x * x * (1.0 - x) ** 2 / delta
    return chi, dchi


class CurvatureModel:
    """Interface shared by the prescribed-curvature models.

    ``phi`` and ``gap`` take ``s`` and an absolute ``z`` of shape
    ``(..., h)``.  ``gap(j, ...)`` is ``ref_level(j) - phi`` evaluated without
    cancellation; energy and residual assembly depend on it when the
    curvature deficit is many orders below ``phi`` itself.
    """

    dims: SpaceDims

    def ref_level(self, j: int) -> float:
        raise NotImplementedError

    def phi(self, s, z):
        raise NotImplementedError

    def gap(self, j, s, z):
        return self.ref_level(j) - self.phi(s, z)

    def x_dot_grad_phi(self, s, z):
        raise NotImplementedError

    def breakpoints(self) -> list:
        """z-points where the model has structure (used to seed quadrature)."""
        return []

    def length_scales(self) -> list:
        return []

    def translated(self, shift) -> "CurvatureModel":
        """The model moved by ``shift`` in z (used for local frames)."""
        raise NotImplementedError

    # perpendicular averaging for axial-mode integrals
    def axial(self, fn, s, zp, tp, frame):
        """Average ``fn(s, z)`` over the perpendicular sphere in an axial frame."""
        h = self.dims.h
        if h == 1:
            return fn(s, frame.z_point(zp))
        if h == 2:
            return 0.5 * (fn(s, frame.z_point(zp, tp, 1.0)) + fn(s, frame.z_point(zp, tp, -1.0)))
        raise NotImplementedError("perpendicular averaging for h >= 3 is model specific")

    def phi_axial(self, s, zp, tp, frame):
        return self.axial(self.phi, s, zp, tp, frame)

    def gap_axial(self, j, s, zp, tp, frame):
        return self.axial(lambda ss, zz: self.gap(j, ss, zz), s, zp, tp, frame)


@dataclass(frozen=True)
class ConstantModel(CurvatureModel):
    """``phi`` identically equal to ``value``."""

    dims: SpaceDims
    value: float = 1.0

    def ref_level(self, j):
        return self.value

    def phi(self, s, z):
        z = _as_z(z, self.dims.h)
        return np.full(np.broadcast_shapes(np.shape(s), z.shape[:-1]), float(self.value))

    def gap(self, j, s, z):
        return np.zeros_like(self.phi(s, z))

    def x_dot_grad_phi(self, s, z):
        return np.zeros_like(self.phi(s, z))

    def translated(self, shift):
        return self

    def axial(self, fn, s, zp, tp, frame):
        if self.dims.h <= 2:
            return super().axial(fn, s, zp, tp, frame)
        return fn(s, frame.origin + np.asarray(zp)[..., None] * frame.axis)


def _vec(x, n, name):
    arr = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    if arr.shape != (n,):
        raise DomainError(f"{name} must have {n} components")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PerturbativeModel:
    """One flatness point of ``K`` with ``phi = 1 + epsilon*K``.

    Near ``(0, center)`` the model is
    ``base + sum(xi)*|y|^gamma + sum_l a_l |z_l - center_l|^gamma`` with the
    remainder dropped.  Globally the polynomial part is multiplied by a C^2
    cutoff equal to 1 on the ball of radius ``delta`` and 0 outside radius
    ``2*delta``, so K is bounded, continuous and equals ``base`` far away.
    """

    dims: SpaceDims
    center: np.ndarray
    base: float
    gamma: float
    xi: np.ndarray
    a: np.ndarray
    sigma: float = 0.5
    delta: float = 0.5
    epsilon: float = 0.0
    strict: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center, self.dims.h, "center"))
        object.__setattr__(self, "xi", _vec(self.xi, self.dims.k, "xi"))
        object.__setattr__(self, "a", _vec(self.a, self.dims.h, "a"))
        if self.strict and not 1.0 < self.gamma < self.dims.N - 2:
            raise DomainError(f"gamma must lie in (1, N-2) = (1, {self.dims.N - 2}), got {self.gamma}")
        if not self.gamma > 0:
            raise DomainError("gamma must be positive")
        if not 0.0 < self.sigma < 1.0:
            raise DomainError("sigma must lie in (0, 1)")
        if np.any(self.xi == 0) or np.any(self.a == 0):
            raise DomainError("all xi_i and a_j must be non-zero")
        if not self.delta > 0:
            raise DomainError("delta must be positive")
        if self.epsilon < 0:
            raise DomainError("epsilon must be non-negative")

    def __eq__(self, other):
        return (isinstance(other, PerturbativeModel)
                and model_to_dict(self) == model_to_dict(other))

    def __hash__(self):
        return hash(json.dumps(model_to_dict(self), sort_keys=True))

    def with_epsilon(self, eps) -> "PerturbativeModel":
        return replace(self, epsilon=float(eps))

    def local_part(self, s, zrel):
        """The flatness polynomial without the base value."""
        g = self.gamma
        return float(np.sum(self.xi)) * np.asarray(s) ** g + np.sum(self.a * np.abs(zrel) ** g, axis=-1)

    def local_x_dot_grad(self, s, z):
        g = self.gamma
        zrel = z - self.center
        yterm = g * float(np.sum(self.xi)) * np.asarray(s) ** g
        with np.errstate(invalid="ignore", divide="ignore"):
            w = np.abs(zrel)
            zterm = np.where(w > 0, g * self.a * w ** (g - 2) * zrel * z, 0.0)
        return yterm + np.sum(zterm, axis=-1)

    def landscape(self) -> "PerturbativeLandscape":
        return PerturbativeLandscape((self,))


@dataclass(frozen=True)
class PerturbativeLandscape(CurvatureModel):
    """``phi = 1 + epsilon*K`` assembled from one or two flatness points.

    ``K = K_far + sum_j chi_j (base_j - K_far + P_j)`` where ``K_far`` is
    the mean of the bases and ``chi_j`` the cutoff of point ``j``.  The
    cutoff supports must be disjoint.
    """

    points: tuple

    def __post_init__(self):
        pts = tuple(self.points)
        object.__setattr__(self, "points", pts)
        if not 1 <= len(pts) <= 2:
            raise DomainError("a landscape holds one or two flatness points")
        if len({p.dims for p in pts}) != 1 or len({p.epsilon for p in pts}) != 1:
            raise DomainError("flatness points must share dims and epsilon")
        if len(pts) == 2:
            d = float(np.linalg.norm(pts[0].center - pts[1].center))
            if d < 2.0 * (pts[0].delta + pts[1].delta) - 1e-12:
                raise DegenerateConfigError("cutoff supports of the two flatness points overlap")

    @property
    def dims(self):
        return self.points[0].dims

    @property
    def epsilon(self):
        return self.points[0].epsilon

    @property
    def k_far(self) -> float:
        return float(np.mean([p.base for p in self.points]))

    def with_epsilon(self, eps) -> "PerturbativeLandscape":
        return PerturbativeLandscape(tuple(p.with_epsilon(eps) for p in self.points))

    def translated(self, shift):
        shift = np.asarray(shift, dtype=float)
        return PerturbativeLandscape(tuple(replace(p, center=p.center + shift) for p in self.points))

    def ref_level(self, j):
        return 1.0

    def K(self, s, z):
        z = _as_z(z, self.dims.h)
        s = np.asarray(s, dtype=float)
        out = self.k_far
        for p in self.points:
            zrel = z - p.center
            r = np.sqrt(s * s + np.sum(zrel ** 2, axis=-1))
            chi, _ = smoothstep_cutoff(r, p.delta)
            out = out + chi * (p.base - self.k_far + p.local_part(s, zrel))
        return out

    def phi(self, s, z):
        return 1.0 + self.epsilon * self.K(s, z)

    def gap(self, j, s, z):
        return -self.epsilon * self.K(s, z)

    def x_dot_grad_phi(self, s, z):
        z = _as_z(z, self.dims.h)
        s = np.asarray(s, dtype=float)
        out = 0.0
        for p in self.points:
            zrel = z - p.center
            r = np.sqrt(s * s + np.sum(zrel ** 2, axis=-1))
            chi, dchi = smoothstep_cutoff(r, p.delta)
            radial = s * s + np.sum(zrel * z, axis=-1)
            with np.errstate(invalid="ignore", divide="ignore"):
                cut_term = np.where(r > 0, dchi * radial / r, 0.0)
            out = out + cut_term * (p.base - self.k_far + p.local_part(s, zrel))
            out = out + chi * p.local_x_dot_grad(s, z)
        return self.epsilon * out

    def breakpoints(self):
        return [p.center for p in self.points]

    def length_scales(self):
        return [p.delta for p in self.points]

    def K_axial(self, s, zp, tp, frame):
        """K averaged over the perpendicular sphere of an axial frame."""
        h = self.dims.h
        if h <= 2:
            return self.axial(self.K, s, zp, tp, frame)
        i = _coordinate_axis(frame.axis)
        for p in self.points:
            off = p.center - frame.origin
            off = off - np.dot(off, frame.axis) * frame.axis
            if i is None or np.any(np.abs(off) > 1e-14):
                raise NotImplementedError(
                    "for h >= 3 the perturbative model supports only coordinate axes through its centres")
        # Put the perpendicular radius on one coordinate, then replace that
        # coordinate's term by the exact spherical mean of all perpendicular ones.
        j = (i + 1) % h
        u = np.zeros(h)
        u[j] = 1.0
        tp = np.asarray(tp, dtype=float)
        s_arr = np.asarray(s, dtype=float)
        z = frame.origin + np.asarray(zp)[..., None] * frame.axis + tp[..., None] * u
        out = self.K(s_arr, z)
        others = [l for l in range(h) if l != i]
        for p in self.points:
            r = np.sqrt(s_arr * s_arr + np.sum((z - p.center) ** 2, axis=-1))
            chi, _ = smoothstep_cutoff(r, p.delta)
            kap = coordinate_average_weight(h - 1, p.gamma)
            out = out + chi * tp ** p.gamma * (kap * float(np.sum(p.a[others])) - p.a[j])
        return out

    def phi_axial(self, s, zp, tp, frame):
        return 1.0 + self.epsilon * self.K_axial(s, zp, tp, frame)

    def gap_axial(self, j, s, zp, tp, frame):
        return -self.epsilon * self.K_axial(s, zp, tp, frame)


def _coordinate_axis(axis):
    idx = np.flatnonzero(np.abs(axis) > 1e-14)
    if idx.size == 1 and abs(abs(axis[idx[0]]) - 1.0) < 1e-14:
        return int(idx[0])
    return None


@dataclass(frozen=True)
class MaxPointModel(CurvatureModel):
    """``phi = max_j (K_j - q_j min(|x - (0,c_j)|, nu)^gamma_j)``.

    Each ``K_j`` is a strict local maximum with ``Q_j(x) = q_j |x|^gamma_j``
    and zero remainder.  The floor ``K_j - q_j nu^gamma_j`` keeps phi
    positive and bounded.
    """

    dims: SpaceDims
    centers: tuple
    K: tuple
    gamma: tuple
    q: tuple
    a0: float
    a1: float
    sigma: float = 0.5
    nu: float = 0.5
    strict: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        h = self.dims.h
        cs = tuple(_vec(c, h, "centre") for c in self.centers)
        object.__setattr__(self, "centers", cs)
        for name in ("K", "gamma", "q"):
            vals = tuple(float(v) for v in np.atleast_1d(getattr(self, name)))
            if len(vals) != len(cs):
                raise DomainError(f"{name} needs one entry per centre")
            object.__setattr__(self, name, vals)
        N = self.dims.N
        for g in self.gamma:
            if self.strict and not N - 2 < g < N:
                raise DomainError(f"gamma_j must lie in (N-2, N) = ({N - 2}, {N}), got {g}")
        if not 0 < self.a0 <= self.a1:
            raise DomainError("need 0 < a0 <= a1")
        for kj, qj, gj in zip(self.K, self.q, self.gamma):
            if not kj > 0:
                raise DomainError("K_j must be positive")
            if not self.a0 <= qj <= self.a1:
                raise DomainError("q_j must lie in [a0, a1]")
            if not kj - qj * self.nu ** gj > 0:
                raise DomainError("phi floor K_j - q_j nu^gamma_j must stay positive")
        if not self.sigma > 0 or not self.nu > 0:
            raise DomainError("sigma and nu must be positive")
        for i in range(len(cs)):
            for j in range(i):
                if np.linalg.norm(cs[i] - cs[j]) == 0:
                    raise DegenerateConfigError("coincident maximum points")

    def ref_level(self, j):
        return self.K[j]

    def translated(self, shift):
        shift = np.asarray(shift, dtype=float)
        return replace(self, centers=tuple(c + shift for c in self.centers))

    def _terms(self, s, z):
        z = _as_z(z, self.dims.h)
        s = np.asarray(s, dtype=float)
        out = []
        for c, g, q in zip(self.centers, self.gamma, self.q):
            r = np.sqrt(s * s + np.sum((z - c) ** 2, axis=-1))
            out.append((r, q * np.minimum(r, self.nu) ** g))
        return out

    def phi(self, s, z):
        terms = self._terms(s, z)
        vals = [kj - t for kj, (_, t) in zip(self.K, terms)]
        return np.maximum.reduce(vals) if len(vals) > 1 else vals[0]

    def gap(self, j, s, z):
        terms = self._terms(s, z)
        vals = [(self.K[j] - kl) + t for kl, (_, t) in zip(self.K, terms)]
        return np.minimum.reduce(vals) if len(vals) > 1 else vals[0]

    def x_dot_grad_phi(self, s, z):
        z = _as_z(z, self.dims.h)
        s = np.asarray(s, dtype=float)
        terms = self._terms(s, z)
        vals = np.stack([kj - t for kj, (_, t) in zip(self.K, terms)])
        act = np.argmax(vals, axis=0)
        out = np.zeros(vals.shape[1:])
        for j, (c, g, q) in enumerate(zip(self.centers, self.gamma, self.q)):
            r = terms[j][0]
            radial = s * s + np.sum((z - c) * z, axis=-1)
            with np.errstate(invalid="ignore", divide="ignore"):
                d = np.where((r < self.nu) & (r > 0), -q * g * r ** (g - 2) * radial, 0.0)
            out = np.where(act == j, d, out)
        return out

    def breakpoints(self):
        return list(self.centers)

    def length_scales(self):
        return [self.nu]

    def axial(self, fn, s, zp, tp, frame):
        h = self.dims.h
        if h <= 2:
            return super().axial(fn, s, zp, tp, frame)
        for c in self.centers:
            off = c - frame.origin
            off = off - np.dot(off, frame.axis) * frame.axis
            if np.any(np.abs(off) > 1e-14):
                raise NotImplementedError("for h >= 3 all maximum points must lie on the axis")
        u = np.zeros(h)
        u[_perp_index(frame.axis)] = 1.0
        u = u - np.dot(u, frame.axis) * frame.axis
        u /= np.linalg.norm(u)
        z = frame.origin + np.asarray(zp)[..., None] * frame.axis + np.asarray(tp)[..., None] * u
        return fn(s, z)


def _perp_index(axis):
    return int(np.argmin(np.abs(axis)))


def as_curvature_model(model) -> CurvatureModel:
    if isinstance(model, PerturbativeModel):
        return model.landscape()
    if isinstance(model, CurvatureModel):
        return model
    raise TypeError(f"not a curvature model: {type(model).__name__}")


# ---------------------------------------------------------------------------
# JSON round trip


def _dims_from(d) -> SpaceDims:
    N, k, h = int(d["N"]), int(d["k"]), int(d["h"])
    return SpaceDims(N, k, h, cr_n=d.get("cr_n"))


def model_from_dict(d: dict):
    """Build a bubble or curvature model from its JSON form."""
    kind = d.get("model")
    dims = _dims_from(d)
    if kind is None and "lambda" in d:
        return Bubble(dims, d["eta"], d["lambda"])
    if kind in (None, "perturbative") and "points" not in d:
        return PerturbativeModel(dims, d["eta"], d.get("base", 0.0), d["gamma"], d["xi"], d["a"],
                                 d.get("sigma", 0.5), d.get("delta", 0.5), d.get("epsilon", 0.0))
    if kind in (None, "perturbative"):
        eps = d.get("epsilon", 0.0)
        pts = []
        for p in d["points"]:
            pts.append(PerturbativeModel(dims, p["eta"], p.get("base", 0.0), p["gamma"], p["xi"],
                                         p["a"], p.get("sigma", 0.5), p.get("delta", 0.5),
                                         p.get("epsilon", eps)))
        return PerturbativeLandscape(tuple(pts))
    if kind == "maxpoint":
        return MaxPointModel(dims, tuple(d["centers"]), tuple(d["K"]), tuple(d["gamma"]),
                             tuple(d["q"]), d["a0"], d["a1"], d.get("sigma", 0.5), d.get("nu", 0.5))
    if kind == "constant":
        return ConstantModel(dims, d.get("value", 1.0))
    raise DomainError(f"unknown model kind {kind!r}")


def model_to_dict(m) -> dict:
    dims = m.dims
    out = {"N": dims.N, "k": dims.k, "h": dims.h}
    if isinstance(m, Bubble):
        out.update(eta=m.eta.tolist(), **{"lambda": m.lam})
    elif isinstance(m, PerturbativeModel):
        out.update(model="perturbative", eta=m.center.tolist(), base=m.base, gamma=m.gamma,
                   xi=m.xi.tolist(), a=m.a.tolist(), sigma=m.sigma, delta=m.delta,
                   epsilon=m.epsilon)
    elif isinstance(m, PerturbativeLandscape):
        out.update(model="perturbative", epsilon=m.epsilon,
                   points=[{k: v for k, v in model_to_dict(p).items()
                            if k not in ("N", "k", "h", "model", "epsilon")} for p in m.points])
    elif isinstance(m, MaxPointModel):
        out.update(model="maxpoint", centers=[c.tolist() for c in m.centers], K=list(m.K),
                   gamma=list(m.gamma), q=list(m.q), a0=m.a0, a1=m.a1, sigma=m.sigma, nu=m.nu)
    elif isinstance(m, ConstantModel):
        out.update(model="constant", value=m.value)
    else:
        raise TypeError(type(m).__name__)
    return out


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
