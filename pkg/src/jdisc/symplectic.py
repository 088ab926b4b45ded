"""Symplectic measurements and Hamiltonian symplectomorphisms of C^2 = R^4.

Real coordinates are ``(x1, y1, x2, y2)`` with
``omega_st = dx1 ^ dy1 + dx2 ^ dy2``.  The default Liouville primitive is
the real part of ``(i/2)(z dzbar + w dwbar)``, i.e.
``(1/2) sum (x dy - y dx)``; its imaginary part is exact and integrates to
zero along closed curves.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import AccuracyError, TamingError
from .grid import winding_number
from .structures import (OMEGA, AlmostComplexStructure, operator_norm,
                         standard_structure, structure_from_matrix, to_complex,
                         to_real)


def standard_liouville(X):
    """Covector of ``(1/2) sum (x dy - y dx)`` at real points ``(..., 4)``."""
    X = np.asarray(X, dtype=float)
    out = np.empty_like(X)
    out[..., 0::2] = -0.5 * X[..., 1::2]
    out[..., 1::2] = 0.5 * X[..., 0::2]
    return out


@dataclass
class SymplecticContext:
    """``omega`` (constant matrix), a primitive ``liouville`` and a structure.

    ``liouville`` maps real points ``(..., 4)`` to covectors ``(..., 4)``;
    the metric is ``mu(V, W) = (omega(V, JW) + omega(W, JV)) / 2``.
    """

    omega: np.ndarray = field(default_factory=lambda: OMEGA.copy())
    liouville: Callable = standard_liouville
    structure: AlmostComplexStructure = field(default_factory=standard_structure)

    def primitive_defect(self, points, h=1e-5):
        """Max ``|d lambda - omega|`` over ``points`` (central differences)."""
        X = np.atleast_2d(np.asarray(points, dtype=float))
        D = np.empty(X.shape + (4,))  # D[..., i, j] = d_i lambda_j
        for i in range(4):
            e = np.zeros(4)
            e[i] = h
            D[:, i, :] = (self.liouville(X + e) - self.liouville(X - e)) / (2 * h)
        dl = D - np.swapaxes(D, -1, -2)
        return float(np.abs(dl - self.omega).max())

    def metric(self, X, V, W):
        J = structure_from_matrix(self.structure.matrix_at(X))
        JW = np.einsum("...ij,...j->...i", J, W)
        JV = np.einsum("...ij,...j->...i", J, V)
        return 0.5 * (np.einsum("...i,ij,...j->...", V, self.omega, JW)
                      + np.einsum("...i,ij,...j->...", W, self.omega, JV))


def metric_norm(V, p, ctx: SymplecticContext | None = None):
    """``sqrt(mu(V, V))`` at the real point ``p``."""
    ctx = ctx or SymplecticContext()
    p = np.asarray(p, dtype=float)
    if operator_norm(ctx.structure.matrix_at(p)) >= 1:
        raise TamingError("structure is not tamed at this point")
    V = np.asarray(V, dtype=float)
    return float(np.sqrt(ctx.metric(p, V, V)))


# ---------------------------------------------------------------------------
# disc measurements
# ---------------------------------------------------------------------------

def _disc_fields(s):
    """``(grid, W)`` from a DiscSolution-like object or a GridFunction."""
    w = getattr(s, "w", s)
    return w.grid, w.values


def area_density(grid, W, z_scale=1.0):
    """Pullback of ``omega_st`` by ``zeta -> (z_scale*zeta, W)`` per unit area."""
    Wz = grid.d_z(W)
    Wzb = grid.d_zbar(W)
    dens = abs(z_scale) ** 2 + np.abs(Wz) ** 2 - np.abs(Wzb) ** 2
    if not np.all(np.isfinite(dens)):
        raise ValueError("non-finite derivative fields")
    return dens


def area(s, ctx: SymplecticContext | None = None, z_scale=1.0, mask=None):
    """``int f^* omega`` for the graph disc ``f(zeta) = (z_scale*zeta, W(zeta))``.

    ``mask`` restricts the quadrature to selected nodes.
    """
    grid, W = _disc_fields(s)
    dens = area_density(grid, W, z_scale)
    if mask is not None:
        dens = np.where(mask, dens, 0.0)
    return float(grid.integrate(dens).real)


def boundary_curve(s, z_scale=1.0):
    """Real points and theta-derivatives of ``f`` along the unit circle."""
    grid, W = _disc_fields(s)
    th = grid.theta
    z = z_scale * np.exp(1j * th)
    wb = W[-1]
    F = np.fft.fft(wb)
    dw = np.fft.ifft(1j * grid.modes_eff * F)
    X = to_real(z, wb)
    dX = to_real(1j * z, dw)
    return X, dX


def boundary_area(s, ctx: SymplecticContext | None = None, z_scale=1.0):
    """``int_{b D} f^* lambda`` by the trapezoid rule (spectral on the circle)."""
    ctx = ctx or SymplecticContext()
    X, dX = boundary_curve(s, z_scale)
    integrand = np.einsum("...i,...i->...", ctx.liouville(X), dX)
    return float(np.sum(integrand) * 2 * np.pi / len(integrand))


def curve_liouville_integral(z_curve, w_curve, ctx: SymplecticContext | None = None):
    """``int lambda`` along a closed curve sampled at equispaced parameters."""
    ctx = ctx or SymplecticContext()
    n = len(z_curve)
    k = np.fft.fftfreq(n, 1.0 / n)
    k[n // 2] = 0.0
    dz = np.fft.ifft(1j * k * np.fft.fft(z_curve))
    dw = np.fft.ifft(1j * k * np.fft.fft(w_curve))
    X = to_real(z_curve, w_curve)
    integrand = np.einsum("...i,...i->...", ctx.liouville(X), to_real(dz, dw))
    return float(np.sum(integrand) * 2 * np.pi / n)


def torus_area_law(t, winding_z, winding_w, R=1.0):
    """Liouville integral over a curve on ``R bD x t bD`` with given windings."""
    return np.pi * R**2 * winding_z + np.pi * t**2 * winding_w


def boundary_length(s, ctx: SymplecticContext | None = None, z_scale=1.0):
    """``int |df/dtheta|_mu dtheta`` along the unit circle."""
    ctx = ctx or SymplecticContext()
    X, dX = boundary_curve(s, z_scale)
    speed = np.sqrt(np.maximum(ctx.metric(X, dX, dX), 0.0))
    return float(np.sum(speed) * 2 * np.pi / len(speed))


@dataclass
class DiscMeasurement:
    """Area report of one disc."""

    disc_id: str
    area: float
    boundary_area: float
    length: float

    @property
    def stokes_gap(self):
        return abs(self.area - self.boundary_area)

    @property
    def ratio(self):
        return self.area / self.length

    def as_record(self):
        return {"disc": self.disc_id, "E": self.area, "E_boundary": self.boundary_area,
                "L": self.length, "E/L": self.ratio, "stokes_gap": self.stokes_gap}


def measure(s, ctx: SymplecticContext | None = None, disc_id="disc"):
    return DiscMeasurement(disc_id, area(s, ctx), boundary_area(s, ctx), boundary_length(s, ctx))


def boundary_windings(s):
    """Winding numbers of the two components of ``f`` along the circle."""
    grid, W = _disc_fields(s)
    return 1, winding_number(W[-1])


# ---------------------------------------------------------------------------
# Hamiltonian maps
# ---------------------------------------------------------------------------

def smooth_step(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.asarray(u, dtype=float)
    f = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
    g = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    return f / (f + g)


def smooth_step_derivative(u):
    u = np.asarray(u, dtype=float)
    inside = (u > 0) & (u < 1)
    out = np.zeros_like(u)
    ui = u[inside]
    f = np.exp(-1.0 / ui)
    g = np.exp(-1.0 / (1.0 - ui))
    df = f / ui**2
    dg = -g / (1.0 - ui) ** 2
    out[inside] = (df * (f + g) - f * (df + dg)) / (f + g) ** 2
    return out


@dataclass
class Hamiltonian:
    """Scalar field with gradient; supported in ``|X| < support_radius``."""

    value: Callable
    gradient: Callable
    support_radius: float = np.inf
    name: str = "hamiltonian"
    h: float = 1e-5

    def hessian(self, X):
        """Central differences of the analytic gradient (step ``h``)."""
        X = np.asarray(X, dtype=float)
        cols = []
        for i in range(4):
            e = np.zeros(4)
            e[i] = self.h
            cols.append((self.gradient(X + e) - self.gradient(X - e)) / (2 * self.h))
        H = np.stack(cols, axis=-1)
        return 0.5 * (H + np.swapaxes(H, -1, -2))


def zero_hamiltonian():
    return Hamiltonian(lambda X: np.zeros(np.shape(X)[:-1]),
                       lambda X: np.zeros(np.shape(X)), 0.0, "zero")


def radial_bump_hamiltonian(amplitude=0.5, radius=1.0):
    """``H = amplitude * F(|Z|^2)``: flows rotate each sphere, keeping ``|Z|``."""
    def F(s):
        return 1.0 - smooth_step(s / radius**2)

    def dF(s):
        return -smooth_step_derivative(s / radius**2) / radius**2

    def value(X):
        return amplitude * F(np.sum(np.asarray(X) ** 2, axis=-1))

    def gradient(X):
        X = np.asarray(X, dtype=float)
        return amplitude * 2 * dF(np.sum(X**2, axis=-1))[..., None] * X

    return Hamiltonian(value, gradient, radius, "radial-bump")


def shear_hamiltonian(strength=0.1, inner=1.0, outer=1.8):
    """Compactly supported shear
    ``H = strength * c(|Z|^2) (y1 + x1^3/3 + x2^2/2 + x1 y2)``.

    ``c`` is 1 on ``|Z| <= inner`` and 0 beyond ``outer``.  Near the origin
    the flow translates ``x1`` and shears ``(x2, y2)`` nonlinearly.
    """
    a2, b2 = inner**2, outer**2

    def c(s):
        return 1.0 - smooth_step((s - a2) / (b2 - a2))

    def dc(s):
        return -smooth_step_derivative((s - a2) / (b2 - a2)) / (b2 - a2)

    def core(X):
        x1, y1, x2, y2 = np.moveaxis(np.asarray(X, dtype=float), -1, 0)
        return y1 + x1**3 / 3 + 0.5 * x2**2 + x1 * y2

    def core_grad(X):
        x1, y1, x2, y2 = np.moveaxis(np.asarray(X, dtype=float), -1, 0)
        return np.stack([y2 + x1**2, np.ones_like(y1), x2, x1], axis=-1)

    def value(X):
        s = np.sum(np.asarray(X) ** 2, axis=-1)
        return strength * c(s) * core(X)

    def gradient(X):
        X = np.asarray(X, dtype=float)
        s = np.sum(X**2, axis=-1)
        return strength * (c(s)[..., None] * core_grad(X)
                           + (2 * dc(s) * core(X))[..., None] * X)

    return Hamiltonian(value, gradient, outer, "shear")


class HamiltonianMap:
    """Time-``flow_time`` map of ``dX/dt = OMEGA grad H`` by implicit midpoint.

    The implicit midpoint rule is symplectic and symmetric, so the exact
    inverse of the discrete map is the same rule run with ``-dt``.  The
    Jacobian is propagated alongside as the product of the step Cayley
    factors ``(I - dt/2 K)^{-1} (I + dt/2 K)``, ``K = OMEGA Hess H``.
    Points outside ``support_radius`` are left untouched.
    """

    def __init__(self, hamiltonian: Hamiltonian, flow_time=1.0, dt=1e-2,
                 newton_tol=1e-15, max_newton=50, check=True):
        self.hamiltonian = hamiltonian
        self.flow_time = float(flow_time)
        n = max(1, int(np.ceil(abs(self.flow_time) / dt - 1e-9)))
        self.n_steps = n
        self.dt = self.flow_time / n
        self.newton_tol = newton_tol
        self.max_newton = max_newton
        R = hamiltonian.support_radius
        self.support_radius = R
        self.support_box = None if not np.isfinite(R) else ((-R,) * 4, (R,) * 4)
        if check:
            drift = self.symplectic_defect(np.random.default_rng(0).uniform(-1, 1, (64, 4)))
            if drift > 1e-6:
                raise AccuracyError(f"step {dt:g} too large: omega drift {drift:.2e}")

    def _field(self, X):
        return self.hamiltonian.gradient(X) @ OMEGA.T

    def _flow(self, X, dt, with_jacobian):
        X = np.array(X, dtype=float)
        shape = X.shape
        X = X.reshape(-1, 4)
        Jac = np.broadcast_to(np.eye(4), (len(X), 4, 4)).copy() if with_jacobian else None
        moving = np.linalg.norm(X, axis=1) < self.support_radius
        if np.isfinite(self.support_radius):
            # trajectories never cross the support boundary, so inactive
            # points stay put
            idx = np.flatnonzero(moving)
        else:
            idx = np.arange(len(X))
        x = X[idx]
        J = Jac[idx] if with_jacobian else None
        I4 = np.eye(4)
        for _ in range(self.n_steps):
            # the midpoint equation is a dt*|Hess H| contraction: plain
            # fixed-point sweeps converge in a handful of iterations
            y = x + dt * self._field(x)
            for _ in range(self.max_newton):
                y_new = x + dt * self._field(0.5 * (x + y))
                err = np.abs(y_new - y).max(initial=0.0)
                y = y_new
                if err < self.newton_tol:
                    break
            else:
                raise AccuracyError("implicit midpoint iteration did not converge")
            if with_jacobian:
                K = OMEGA @ self.hamiltonian.hessian(0.5 * (x + y))
                J = np.linalg.solve(I4 - 0.5 * dt * K, (I4 + 0.5 * dt * K) @ J)
            x = y
        X[idx] = x
        if with_jacobian:
            Jac[idx] = J
            return X.reshape(shape), Jac.reshape(shape + (4,))
        return X.reshape(shape)

    def forward(self, X):
        return self._flow(X, self.dt, False)

    def inverse(self, Y):
        return self._flow(Y, -self.dt, False)

    def forward_with_jacobian(self, X):
        return self._flow(X, self.dt, True)

    def jacobian(self, X):
        return self._flow(X, self.dt, True)[1]

    def inverse_with_jacobian(self, Y):
        return self._flow(Y, -self.dt, True)

    def inverse_jacobian(self, Y):
        return self._flow(Y, -self.dt, True)[1]

    def fd_jacobian(self, X, h=1e-5):
        """Finite-difference Jacobian (independent check of the tangent flow)."""
        X = np.asarray(X, dtype=float)
        cols = []
        for i in range(4):
            e = np.zeros(4)
            e[i] = h
            cols.append((self.forward(X + e) - self.forward(X - e)) / (2 * h))
        return np.stack(cols, axis=-1)

    def symplectic_defect(self, X, jacobian=None):
        """Max ``|M^T OMEGA M - OMEGA|`` at the points ``X``."""
        M = self.jacobian(X) if jacobian is None else jacobian(X)
        return float(np.abs(np.swapaxes(M, -1, -2) @ OMEGA @ M - OMEGA).max())

    # complex-pair conveniences
    def __call__(self, z, w):
        return to_complex(self.forward(to_real(z, w)))


def make_hamiltonian_map(H: Hamiltonian, T=1.0, dt=1e-2):
    """Time-``T`` Hamiltonian flow of ``H`` (implicit midpoint, step ``dt``)."""
    return HamiltonianMap(H, T, dt)


class IdentityMap:
    """The identity, with the same interface as :class:`HamiltonianMap`."""

    support_radius = 0.0
    support_box = None

    def forward(self, X):
        return np.array(X, dtype=float)

    inverse = forward

    def jacobian(self, X):
        return np.broadcast_to(np.eye(4), np.shape(X) + (4,)).copy()

    inverse_jacobian = jacobian

    def forward_with_jacobian(self, X):
        return self.forward(X), self.jacobian(X)

    inverse_with_jacobian = forward_with_jacobian
