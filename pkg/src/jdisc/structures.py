"""Almost complex structures on C^2 stored as complex matrix fields.

A structure ``J`` is encoded by the complex 2x2 matrix ``A(Z)`` for which
the J-complex curves ``u`` are exactly the solutions of
``u_zbar = A(u) conj(u_z)``.  In real coordinates ``(x1, y1, x2, y2)`` the
antilinear map ``P V = A conj(V)`` relates the two by

    J = J_st (I - P) (I + P)^{-1},   P = (J_st + J)^{-1} (J_st - J).

Points of C^2 are passed either as complex pairs ``(z, w)`` (arrays that
broadcast together) or as real arrays of shape ``(..., 4)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import CorrespondenceError, DegenerateStructureError, TamingError

J_ST = np.kron(np.eye(2), np.array([[0.0, -1.0], [1.0, 0.0]]))
# omega_st(U, V) = U^T OMEGA V, with dx ^ dy (e_x, e_y) = 1
OMEGA = np.kron(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]]))
CONJ = np.diag([1.0, -1.0, 1.0, -1.0])
DEGENERACY_TOL = 1e-12


# ---------------------------------------------------------------------------
# coordinates and pointwise linear algebra
# ---------------------------------------------------------------------------

def to_real(z, w):
    """Complex pair -> real array ``(..., 4)``."""
    z, w = np.broadcast_arrays(np.asarray(z, dtype=complex), np.asarray(w, dtype=complex))
    return np.stack([z.real, z.imag, w.real, w.imag], axis=-1)


def to_complex(X):
    """Real array ``(..., 4)`` -> complex pair ``(z, w)``."""
    X = np.asarray(X, dtype=float)
    return X[..., 0] + 1j * X[..., 1], X[..., 2] + 1j * X[..., 3]


def realify(A):
    """Real 4x4 matrix of the complex-linear map ``V -> A V``."""
    A = np.asarray(A, dtype=complex)
    R = np.zeros(A.shape[:-2] + (4, 4))
    R[..., 0::2, 0::2] = A.real
    R[..., 0::2, 1::2] = -A.imag
    R[..., 1::2, 0::2] = A.imag
    R[..., 1::2, 1::2] = A.real
    return R


def structure_from_matrix(A):
    """Pointwise ``J`` (shape ``(..., 4, 4)``) of complex matrices ``A``."""
    A = np.asarray(A, dtype=complex)
    det = np.linalg.det(np.eye(2) - A @ np.conj(A))
    if np.any(np.abs(det) < DEGENERACY_TOL):
        raise DegenerateStructureError("det(I - A conj(A)) vanishes")
    P = realify(A) @ CONJ
    I = np.eye(4)
    # J = J_st (I - P)(I + P)^{-1}, via a solve on the transposed system
    M = np.swapaxes(np.linalg.solve(np.swapaxes(I + P, -1, -2),
                                    np.swapaxes(I - P, -1, -2)), -1, -2)
    return J_ST @ M


def matrix_from_structure(J):
    """Pointwise complex matrix ``A`` of real structures ``J`` ``(..., 4, 4)``."""
    J = np.asarray(J, dtype=float)
    S = J_ST + J
    cond = np.linalg.cond(S)
    if np.any(~np.isfinite(cond)) or np.any(cond > 1e12):
        raise CorrespondenceError("J_st + J is singular")
    M = np.linalg.solve(S, J_ST - J) @ CONJ
    return M[..., 0::2, 0::2] + 1j * M[..., 1::2, 0::2]


def operator_norm(A):
    """Largest singular value of each 2x2 matrix."""
    return np.linalg.norm(np.asarray(A, dtype=complex), ord=2, axis=(-2, -1))


def taming_form(J):
    """Symmetric part of ``OMEGA J``; positive definite iff ``J`` is tamed."""
    S = OMEGA @ J
    return 0.5 * (S + np.swapaxes(S, -1, -2))


# ---------------------------------------------------------------------------
# structures
# ---------------------------------------------------------------------------

MatrixField = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class AlmostComplexStructure:
    """Matrix field ``(z, w) -> A`` of shape ``broadcast(z, w).shape + (2, 2)``.

    ``support_hint`` is an optional real box ``(lo, hi)`` (each a length-4
    sequence) outside which ``A`` vanishes.
    """

    matrix_field: MatrixField
    support_hint: tuple | None = None
    name: str = "custom"

    def matrix(self, z, w):
        z, w = np.broadcast_arrays(np.asarray(z, dtype=complex), np.asarray(w, dtype=complex))
        A = np.asarray(self.matrix_field(z, w), dtype=complex)
        return np.broadcast_to(A, z.shape + (2, 2))

    def matrix_at(self, X):
        return self.matrix(*to_complex(X))

    def J(self, z, w):
        """Real structure ``J`` at the given points."""
        return structure_from_matrix(self.matrix(z, w))

    def norm(self, z, w):
        return operator_norm(self.matrix(z, w))

    def translated(self, dz=0.0, dw=0.0, name=None):
        """Structure moved by the complex translation ``(z, w) -> (z + dz, w + dw)``."""
        f = self.matrix_field
        hint = None
        if self.support_hint is not None:
            shift = to_real(dz, dw)
            hint = (tuple(np.add(self.support_hint[0], shift)),
                    tuple(np.add(self.support_hint[1], shift)))
        return AlmostComplexStructure(lambda z, w: f(z - dz, w - dw), hint,
                                      name or f"{self.name}+shift")

    @property
    def is_triangular(self):
        return False


def standard_structure():
    """``J_st`` (``A = 0``)."""
    return AlmostComplexStructure(
        lambda z, w: np.zeros(np.shape(z) + (2, 2), dtype=complex),
        support_hint=((0.0,) * 4, (0.0,) * 4), name="standard")


@dataclass(frozen=True)
class TriangularStructure:
    """Structure with matrix ``[[a, 0], [b, 0]]``: vertical lines are J-complex.

    For such a structure the graph ``w = W(z)`` is a J-complex curve exactly
    when ``W_zbar + a(z, W) W_z = b(z, W)``.  ``a0`` bounds ``|a|`` globally.
    """

    a_field: Callable
    b_field: Callable
    a0: float
    name: str = "triangular"
    support_hint: tuple | None = None
    w_equivariant: bool = False  # b(z, e^{is} w) = e^{is} b and a invariant

    def __post_init__(self):
        if not 0 <= self.a0 < 1:
            raise DegenerateStructureError(f"|a| bound a0 = {self.a0} is not below 1")

    def a(self, z, w):
        return np.broadcast_to(np.asarray(self.a_field(z, w), dtype=complex),
                               np.broadcast(z, w).shape)

    def b(self, z, w):
        return np.broadcast_to(np.asarray(self.b_field(z, w), dtype=complex),
                               np.broadcast(z, w).shape)

    def as_structure(self) -> AlmostComplexStructure:
        def field(z, w):
            A = np.zeros(np.broadcast(z, w).shape + (2, 2), dtype=complex)
            A[..., 0, 0] = self.a(z, w)
            A[..., 1, 0] = self.b(z, w)
            return A
        return AlmostComplexStructure(field, self.support_hint, self.name)

    def matrix(self, z, w):
        return self.as_structure().matrix(z, w)

    @property
    def is_triangular(self):
        return True


def graph_equation_coefficients(T: TriangularStructure):
    """Coefficient fields ``(a, b)`` of ``W_zbar + a W_z = b``."""
    if not T.a0 < 1:
        raise DegenerateStructureError("a0 must be below 1")
    return T.a, T.b


# ---------------------------------------------------------------------------
# correspondence at the field level
# ---------------------------------------------------------------------------

def matrix_of_structure(J_field, support_hint=None, name="from-J"):
    """:class:`AlmostComplexStructure` of a real field ``X -> J(X)``.

    ``J_field`` takes real points ``(..., 4)`` and returns ``(..., 4, 4)``;
    a constant 4x4 array is accepted as well.
    """
    if callable(J_field):
        def field(z, w):
            return matrix_from_structure(J_field(to_real(z, w)))
    else:
        J0 = np.asarray(J_field, dtype=float)
        A0 = matrix_from_structure(J0)

        def field(z, w):
            return np.broadcast_to(A0, np.broadcast(z, w).shape + (2, 2))
    return AlmostComplexStructure(field, support_hint, name)


def structure_of_matrix(A: AlmostComplexStructure):
    """Real field ``X -> J(X)`` of a structure given by its matrix."""
    def J(X):
        return structure_from_matrix(A.matrix_at(X))
    return J


def is_tamed(A, samples):
    """Sampled taming predicate ``max ||A|| < 1``.

    ``samples`` is a real array ``(n, 4)`` or a complex pair.  Returns
    ``(tamed, margin)`` with ``margin = 1 - max ||A||``.
    """
    if isinstance(samples, tuple):
        mats = A.matrix(*samples)
    else:
        mats = A.matrix_at(samples)
    worst = float(operator_norm(mats).max(initial=0.0))
    return worst < 1.0, 1.0 - worst


def omega_jv(A, X, V):
    """``omega_st(V, J V)`` at real points ``X`` for real vectors ``V``."""
    J = structure_from_matrix(A.matrix_at(X))
    JV = np.einsum("...ij,...j->...i", J, V)
    return np.einsum("...i,ij,...j->...", V, OMEGA, JV)


def sample_box(rng, n, lo=-1.5, hi=1.5):
    """``n`` uniform real points in a box."""
    return rng.uniform(lo, hi, size=(n, 4))


# ---------------------------------------------------------------------------
# Levi form
# ---------------------------------------------------------------------------

def _grad(f, x, h):
    e = np.eye(4) * h
    return np.array([(f(x + e[i]) - f(x - e[i])) / (2 * h) for i in range(4)])


def levi_form(rho, p, V, J=None, h=1e-4):
    """``-d(J^* d rho)(V, J V)`` at ``p`` by nested central differences.

    ``rho`` maps real 4-vectors to reals; ``J`` is ``None`` (``J_st``), an
    :class:`AlmostComplexStructure`, or a field ``X -> (4, 4)``.  With
    ``alpha = J^* d rho`` (components ``alpha_j = sum_k d_k rho J_kj``),
    ``d alpha(U, W) = U^T (D alpha) W - W^T (D alpha) U`` where
    ``(D alpha)_ij = d_i alpha_j``.
    """
    if h < 1e-6:
        warnings.warn(f"Levi form step h = {h:g} loses most digits to cancellation",
                      RuntimeWarning, stacklevel=2)
    if J is None:
        Jf = lambda X: J_ST  # noqa: E731
    elif isinstance(J, AlmostComplexStructure):
        Jf = structure_of_matrix(J)
    else:
        Jf = J
    p = np.asarray(p, dtype=float)
    V = np.asarray(V, dtype=float)

    def alpha(x):
        return _grad(rho, x, h) @ Jf(x)

    D = _grad(alpha, p, h)  # D[i, j] = d_i alpha_j
    JV = Jf(p) @ V
    return float(-(V @ D @ JV - JV @ D @ V))


def complex_hessian_form(rho, p, V, h=1e-4):
    """Classical Levi form ``4 sum rho_{j kbar} v_j conj(v_k)`` for ``J_st``.

    With this normalization it equals :func:`levi_form` for ``J = J_st``.
    """
    p = np.asarray(p, dtype=float)
    H = np.empty((4, 4))
    e = np.eye(4) * h
    for i in range(4):
        for j in range(4):
            H[i, j] = (rho(p + e[i] + e[j]) - rho(p + e[i] - e[j])
                       - rho(p - e[i] + e[j]) + rho(p - e[i] - e[j])) / (4 * h * h)
    # complex Hessian rho_{j kbar} = (1/4)(d_x + i d_y... ) written in reals
    v = np.asarray(V, dtype=float)
    vc = v[0::2] + 1j * v[1::2]
    L = 0.0
    for j in range(2):
        for k in range(2):
            xj, yj, xk, yk = 2 * j, 2 * j + 1, 2 * k, 2 * k + 1
            hjk = 0.25 * (H[xj, xk] + H[yj, yk] + 1j * (H[xj, yk] - H[yj, xk]))
            L += hjk * vc[j] * np.conj(vc[k])
    return float(4 * L.real)


# ---------------------------------------------------------------------------
# pushforward and cutoff
# ---------------------------------------------------------------------------

def pushforward(phi, J=None, name="pushforward"):
    """Structure ``dphi o J o dphi^{-1}`` transported to the image of ``phi``.

    ``phi`` must provide ``inverse(Y)`` and ``jacobian(X)`` on real arrays
    ``(..., 4)``; an ``inverse_jacobian(Y)`` method, when present, is used
    for ``dphi^{-1}`` at image points.  ``J`` is ``None`` for ``J_st`` or an
    :class:`AlmostComplexStructure`.
    """
    def field(z, w):
        Y = to_real(z, w)
        X = phi.inverse(Y)
        if hasattr(phi, "inverse_jacobian"):
            Minv = phi.inverse_jacobian(Y)
            M = np.linalg.inv(Minv)
        else:
            M = phi.jacobian(X)
            if np.any(np.abs(np.linalg.det(M)) < 1e-12):
                raise DegenerateStructureError("singular differential")
            Minv = np.linalg.inv(M)
        J0 = J_ST if J is None else structure_from_matrix(J.matrix_at(X))
        return matrix_from_structure(M @ J0 @ Minv)
    hint = getattr(phi, "support_box", None)
    return AlmostComplexStructure(field, hint, name)


def smoothstep5(s):
    """Quintic smoothstep clipped to ``[0, 1]`` (C^2 at both ends)."""
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10 - 15 * s + 6 * s * s)


@dataclass(frozen=True)
class BallRegion:
    """Euclidean ball, optionally transported: ``{transform(X) : |X - c| < radius}``.

    ``transform`` is any object with ``forward``/``inverse`` on real points
    (e.g. a Hamiltonian map); with it the region is ``phi(ball)``.
    """

    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    transform: object = None

    def gauge(self, X):
        """``|pre-image - center| / radius`` (below 1 exactly inside)."""
        Y = X if self.transform is None else self.transform.inverse(X)
        return np.linalg.norm(Y - to_real(*self.center), axis=-1) / self.radius

    def contains(self, X):
        return self.gauge(X) < 1

    def sample(self, n, rng):
        d = rng.normal(size=(n, 4))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        X = to_real(*self.center) + self.radius * d * rng.uniform(0, 1, (n, 1)) ** 0.25
        return X if self.transform is None else self.transform.forward(X)


@dataclass(frozen=True)
class BoxRegion:
    """Axis-aligned real box ``|x_i - c_i| < half_i``."""

    center: tuple
    half_widths: tuple

    def contains(self, X):
        return np.all(np.abs(X - np.asarray(self.center)) < np.asarray(self.half_widths), axis=-1)

    def sample(self, n, rng):
        c = np.asarray(self.center, float)
        return c + rng.uniform(-1, 1, size=(n, 4)) * np.asarray(self.half_widths, float)


def _cutoff(inner, outer):
    if isinstance(inner, BallRegion) and isinstance(outer, BallRegion):
        if inner.transform is not outer.transform or inner.center != outer.center:
            raise ValueError("ball regions must be concentric with the same map")
        if not inner.radius < outer.radius:
            raise ValueError("K_inner must be compactly inside K_outer")
        a, b = inner.radius, outer.radius

        def chi(X):
            return smoothstep5((b - inner.gauge(X) * a) / (b - a))
        return chi
    if isinstance(inner, BoxRegion) and isinstance(outer, BoxRegion):
        ci, co = np.asarray(inner.center, float), np.asarray(outer.center, float)
        hi, ho = np.asarray(inner.half_widths, float), np.asarray(outer.half_widths, float)
        if not np.allclose(ci, co) or np.any(hi >= ho):
            raise ValueError("boxes must be concentric and strictly nested")

        def chi(X):
            d = np.abs(np.asarray(X) - ci)
            return np.prod(smoothstep5((ho - d) / (ho - hi)), axis=-1)
        return chi
    raise TypeError("unsupported region pair")


def blend_cutoff(A_inner: AlmostComplexStructure, K_inner, K_outer,
                 check_samples=2000, rng=None, name="blend"):
    """``chi A_inner`` with ``chi = 1`` on ``K_inner`` and ``0`` off ``K_outer``.

    Tamed matrices form a convex set containing 0, so the blend is tamed
    wherever ``A_inner`` is; this is checked on ``check_samples`` points of
    ``K_outer`` (raising :class:`TamingError`).  The cutoff is the quintic
    smoothstep of the regions' common gauge.
    """
    chi = _cutoff(K_inner, K_outer)
    if check_samples:
        rng = np.random.default_rng(0) if rng is None else rng
        tamed, margin = is_tamed(A_inner, K_outer.sample(check_samples, rng))
        if not tamed:
            raise TamingError(f"input structure not tamed on K_outer (margin {margin:.3g})")

    def field(z, w):
        X = to_real(z, w)
        c = chi(X)
        out = np.zeros(X.shape[:-1] + (2, 2), dtype=complex)
        on = c > 0
        if np.any(on):
            out[on] = c[on][:, None, None] * A_inner.matrix_at(X[on])
        return out
    return AlmostComplexStructure(field, A_inner.support_hint, name), chi


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def bump(s):
    """``exp(1 - 1/(1 - s^2))`` on ``|s| < 1``, zero outside; bump(0) = 1."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    m = np.abs(s) < 1
    out[m] = np.exp(1.0 - 1.0 / (1.0 - s[m] ** 2))
    return out


def bump_perturbation(norm=0.3, z_radius=0.5, w_inner=0.25, w_outer=0.75,
                      a_share=0.6, equivariant=False):
    """Triangular structure supported in ``{|z| < z_radius, w_inner < |w| < w_outer}``.

    ``a = a_share * norm * chi`` and ``b = sqrt(1 - a_share^2) * norm * chi``
    (times ``w/|w|`` when ``equivariant``), so ``||A||`` peaks at ``norm``.
    """
    if not 0 <= norm < 1:
        raise DegenerateStructureError("bump norm must lie in [0, 1)")
    mid = 0.5 * (w_inner + w_outer)
    half = 0.5 * (w_outer - w_inner)
    ca = a_share * norm
    cb = np.sqrt(1.0 - a_share**2) * norm

    def chi(z, w):
        return bump(np.abs(z) / z_radius) * bump((np.abs(w) - mid) / half)

    def a(z, w):
        return ca * chi(z, w)

    if equivariant:
        def b(z, w):
            aw = np.abs(w)
            phase = np.where(aw > 0, w / np.where(aw > 0, aw, 1.0), 0.0)
            return cb * chi(z, w) * phase
    else:
        def b(z, w):
            return cb * chi(z, w) + 0j

    box = ((-z_radius, -z_radius, -w_outer, -w_outer), (z_radius, z_radius, w_outer, w_outer))
    return TriangularStructure(a, b, a0=ca, name="bump-perturbation",
                               support_hint=box, w_equivariant=equivariant)


def flat_triangular():
    """``J_st`` as a triangular structure."""
    zero = lambda z, w: np.zeros(np.broadcast(z, w).shape, dtype=complex)  # noqa: E731
    return TriangularStructure(zero, zero, a0=0.0, name="standard",
                               support_hint=((0.0,) * 4, (0.0,) * 4), w_equivariant=True)


def pinch_structure(strength=0.95, w_on=0.5, width=0.1):
    """Stress preset ``b = -strength w/|w|`` beyond ``|w| = w_on`` (``a = 0``).

    Tamed for ``strength < 1``, but the inward pull drives the discs of
    large ``t`` towards ``w = 0``, so continuation breaks down part way.
    """
    if not 0 <= strength < 1:
        raise DegenerateStructureError("pinch strength must lie in [0, 1)")

    def b(z, w):
        return -strength * smoothstep5((np.abs(w) - w_on) / width) * np.exp(1j * np.angle(w))
    zero = lambda z, w: np.zeros(np.broadcast(z, w).shape, dtype=complex)  # noqa: E731
    return TriangularStructure(zero, b, a0=0.0, name="pinch", w_equivariant=True)


@dataclass(frozen=True)
class HartogsModel:
    """Model embedding ``H(z, w) = (z, r(z) w)`` of the bidisc.

    ``delta`` is the width of the boundary collar ``{1 - delta < |z| < 1}``
    on which the vertical discs are attached to the outer shell.
    """

    radius_profile: Callable
    delta: float = 0.3
    h: float = 1e-6

    def __post_init__(self):
        z = np.linspace(0, 1, 64)[:, None] * np.exp(2j * np.pi * np.linspace(0, 1, 64))[None, :]
        r = np.asarray(self.radius_profile(z), dtype=float)
        if np.any(r <= 0) or np.any(r > 1 + 1e-12):
            raise ValueError("radius profile must satisfy 0 < r(z) <= 1")

    def forward(self, X):
        z, w = to_complex(X)
        return to_real(z, self.radius_profile(z) * w)

    def inverse(self, Y):
        z, w = to_complex(Y)
        return to_real(z, w / self.radius_profile(z))

    def jacobian(self, X):
        X = np.asarray(X, dtype=float)
        cols = []
        for i in range(4):
            e = np.zeros(4)
            e[i] = self.h
            cols.append((self.forward(X + e) - self.forward(X - e)) / (2 * self.h))
        return np.stack(cols, axis=-1)
