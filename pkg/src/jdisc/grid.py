"""Polar grids on the closed unit disc and on annuli.

Functions on a grid are complex arrays of shape ``(n_radial, n_angular)``;
row ``j`` is the circle of radius ``radial_nodes[j]`` and column ``k`` the
angle ``2*pi*k/n_angular``.  The last row is always the unit circle.

Differentiation is Fourier-spectral in the angle and fourth-order finite
differences in the radius.  On the disc the innermost layer sits at
``dr/2`` and the radial stencils reach across the origin using
``f(-r, theta) = f(r, theta + pi)``, which in Fourier space is a parity
factor ``(-1)**m`` on angular mode ``m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ResolutionError, WindingError

STENCIL = 5  # 4th-order first derivative
BOUNDARY_STENCIL = 6  # one-sided closure at the outer rows


def fd_weights(x0, xs, deriv=1):
    """Finite-difference weights for the ``deriv``-th derivative at ``x0``.

    Solves the Vandermonde system on the (shifted, scaled) stencil nodes; the
    stencils used here have at most six points so conditioning is benign.
    """
    xs = np.asarray(xs, dtype=float)
    scale = np.max(np.abs(xs - x0))
    s = (xs - x0) / scale
    n = len(xs)
    V = np.vander(s, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[deriv] = math.factorial(deriv)
    return np.linalg.solve(V, rhs) / scale**deriv


def _cubic_cell_weights(x, a, b):
    """Weights integrating the cubic through nodes ``x`` over ``[a, b]``."""
    h = b - a
    s = (np.asarray(x, dtype=float) - a) / h
    w = np.empty(len(s))
    for i in range(len(s)):
        others = np.delete(s, i)
        anti = (np.poly1d(others, r=True) / np.prod(s[i] - others)).integ()
        w[i] = (anti(1.0) - anti(0.0)) * h
    return w


class PolarGrid:
    """Tensor grid ``radial_nodes x angles`` with Fourier angular structure.

    This is the shared machinery; use :class:`DiscGrid` or
    :class:`AnnulusGrid`.  ``through_origin`` switches the radial stencils
    to reflect across ``r = 0``.
    """

    through_origin = False

    def __init__(self, radial_nodes, n_angular):
        n_angular = int(n_angular)
        if n_angular < 8 or n_angular & (n_angular - 1):
            raise ValueError("n_angular must be a power of two >= 8")
        r = np.asarray(radial_nodes, dtype=float)
        if r.ndim != 1 or len(r) < STENCIL + 1:
            raise ValueError(f"need at least {STENCIL + 1} radial nodes")
        if np.any(np.diff(r) <= 0):
            raise ValueError("radial nodes must increase")
        self.radial_nodes = r
        self.n_radial = len(r)
        self.n_angular = n_angular
        self.theta = 2 * np.pi * np.arange(n_angular) / n_angular
        m = np.fft.fftfreq(n_angular, 1.0 / n_angular).astype(int)
        self.modes = m
        self.nyquist = int(np.argmin(m))  # index of mode -N/2
        # d/dtheta multiplier; the Nyquist mode is not differentiated
        m_eff = m.astype(float)
        m_eff[self.nyquist] = 0.0
        self.modes_eff = m_eff

    # -- geometry ---------------------------------------------------------
    @property
    def shape(self):
        return (self.n_radial, self.n_angular)

    @property
    def size(self):
        return self.n_radial * self.n_angular

    @cached_property
    def R(self):
        return np.repeat(self.radial_nodes[:, None], self.n_angular, axis=1)

    @cached_property
    def TH(self):
        return np.repeat(self.theta[None, :], self.n_radial, axis=0)

    @cached_property
    def z(self):
        """Complex coordinate of every node."""
        return self.R * np.exp(1j * self.TH)

    @cached_property
    def spacing(self):
        """Largest node spacing: max of radial step and boundary arc step."""
        return float(max(np.max(np.diff(self.radial_nodes)),
                         self.radial_nodes[-1] * 2 * np.pi / self.n_angular))

    @property
    def includes_boundary(self):
        return bool(abs(self.radial_nodes[-1] - 1.0) < 1e-14)

    def boundary(self, f):
        """Trace of ``f`` on the outer circle."""
        return np.asarray(f)[-1]

    # -- radial stencils --------------------------------------------------
    def _stencil_rows(self, parity):
        """Dense radial derivative matrix for angular modes of ``parity``."""
        r = self.radial_nodes
        n = self.n_radial
        D = np.zeros((n, n))
        half = STENCIL // 2
        for j in range(n):
            if self.through_origin and j < half:
                idx = list(range(j - half, j + half + 1))
            elif j < half:
                idx = list(range(0, STENCIL))
            elif j > n - 1 - half:
                idx = list(range(n - BOUNDARY_STENCIL, n))
            else:
                idx = list(range(j - half, j + half + 1))
            pos = np.array([r[i] if i >= 0 else -r[-i - 1] for i in idx])
            w = fd_weights(r[j], pos)
            for i, wi in zip(idx, w):
                if i >= 0:
                    D[j, i] += wi
                else:
                    D[j, -i - 1] += parity * wi
        return D

    @cached_property
    def D_even(self):
        return self._stencil_rows(+1)

    @cached_property
    def D_odd(self):
        return self._stencil_rows(-1)

    @cached_property
    def _odd_modes(self):
        return (self.modes % 2).astype(bool)

    def radial_matrix(self, mode_index):
        m = self.modes[mode_index]
        return self.D_odd if m % 2 else self.D_even

    # -- spectral transforms ------------------------------------------------
    def to_modes(self, f):
        return np.fft.fft(np.asarray(f, dtype=complex), axis=-1) / self.n_angular

    def from_modes(self, F):
        return np.fft.ifft(F, axis=-1) * self.n_angular

    def _dr_modes(self, F):
        out = np.empty_like(F)
        odd = self._odd_modes
        out[:, ~odd] = self.D_even @ F[:, ~odd]
        out[:, odd] = self.D_odd @ F[:, odd]
        return out

    def d_r(self, f):
        return self.from_modes(self._dr_modes(self.to_modes(f)))

    def d_theta(self, f):
        F = self.to_modes(f)
        return self.from_modes(1j * self.modes_eff[None, :] * F)

    def d_zbar(self, f):
        """Wirtinger derivative d/dzbar = e^{i th}/2 (d_r + (i/r) d_th)."""
        F = self.to_modes(f)
        G = 0.5 * (self._dr_modes(F) - self.modes_eff[None, :] * F / self.radial_nodes[:, None])
        return self.from_modes(np.roll(G, 1, axis=1))

    def d_z(self, f):
        """Wirtinger derivative d/dz = e^{-i th}/2 (d_r - (i/r) d_th)."""
        F = self.to_modes(f)
        G = 0.5 * (self._dr_modes(F) + self.modes_eff[None, :] * F / self.radial_nodes[:, None])
        return self.from_modes(np.roll(G, -1, axis=1))

    def spectral_tail(self, f, band=0.125):
        """Relative size of the top ``band`` fraction of angular modes."""
        F = np.abs(self.to_modes(f))
        top = F.max()
        if top == 0:
            return 0.0
        cut = (1 - band) * self.n_angular / 2
        return float(F[:, np.abs(self.modes) >= cut].max() / top)

    # -- quadrature -------------------------------------------------------
    def _radial_weights(self):
        """Weights for int F(r) r dr over the radial extent (F even in r)."""
        r = self.radial_nodes
        n = self.n_radial
        rho = np.zeros(n)

        def position(i):
            return r[i] if i >= 0 else -r[-i - 1]

        def add(idx, a, b):
            xs = np.array([position(i) for i in idx])
            w = _cubic_cell_weights(xs, a, b)
            for i, wi, x in zip(idx, w, xs):
                # integrand G = F r; ghosts carry G(-r) = -r F(r)
                rho[i if i >= 0 else -i - 1] += wi * x

        if self.through_origin:
            add([-2, -1, 0, 1], 0.0, r[0])
        for j in range(n - 1):
            lo = j - 1
            if lo < 0 and not self.through_origin:
                lo = 0
            lo = min(lo, n - 4)
            add(list(range(lo, lo + 4)), r[j], r[j + 1])
        return rho

    @cached_property
    def quadrature_weights(self):
        rho = self._radial_weights()
        return np.repeat(rho[:, None] * (2 * np.pi / self.n_angular), self.n_angular, axis=1)

    def integrate(self, f):
        f = np.asarray(f)
        if not np.all(np.isfinite(f)):
            raise ValueError("non-finite values in integrand")
        return complex(np.sum(self.quadrature_weights * f))

    def boundary_integral(self, g):
        """Trapezoid rule for int_0^{2pi} g(theta) d theta on the outer circle."""
        return complex(np.sum(g) * 2 * np.pi / self.n_angular)

    # -- interpolation -----------------------------------------------------
    def evaluate(self, f, points, order=6):
        """Interpolate ``f`` at arbitrary complex ``points`` inside the grid.

        Trigonometric in the angle, Lagrange of the given order in the radius.
        """
        pts = np.atleast_1d(np.asarray(points, dtype=complex)).ravel()
        F = self.to_modes(f)
        r = self.radial_nodes
        rp = np.abs(pts)
        tp = np.angle(pts)
        m = self.modes.astype(float)
        E = np.exp(1j * np.outer(tp, m))
        E[:, self.nyquist] = np.cos(self.n_angular / 2 * tp)
        if self.through_origin:
            par = np.where(self.modes % 2, -1.0, 1.0)
            ghost = (F[: order // 2][::-1] * par[None, :])
            Fx = np.concatenate([ghost, F], axis=0)
            rx = np.concatenate([-r[: order // 2][::-1], r])
        else:
            Fx, rx = F, r
        out = np.empty(len(pts), dtype=complex)
        nx = len(rx)
        start = np.searchsorted(rx, rp) - order // 2
        start = np.clip(start, 0, nx - order)
        for s in np.unique(start):
            sel = start == s
            xs = rx[s:s + order]
            vals = Fx[s:s + order] @ E[sel].T  # (order, npts)
            L = np.ones((order, sel.sum()))
            for i in range(order):
                for k in range(order):
                    if k != i:
                        L[i] *= (rp[sel] - xs[k]) / (xs[i] - xs[k])
            out[sel] = np.sum(L * vals, axis=0)
        return out.reshape(np.shape(points)) if np.ndim(points) else out[0]

    def subsample(self, spacing):
        """Node indices giving a roughly uniform cloud with given spacing."""
        rows = []
        cols = []
        stride_r = max(1, int(round(spacing / np.max(np.diff(self.radial_nodes)))))
        for j in range(self.n_radial - 1, -1, -stride_r):
            count = max(1, int(round(2 * np.pi * self.radial_nodes[j] / spacing)))
            # power-of-two divisor of n_angular closest to count
            c = 1
            while c * 2 <= min(count, self.n_angular):
                c *= 2
            ks = np.arange(0, self.n_angular, self.n_angular // c)
            rows.extend([j] * len(ks))
            cols.extend(ks.tolist())
        return np.array(rows), np.array(cols)


class DiscGrid(PolarGrid):
    """Polar grid on the closed unit disc, innermost layer at ``dr/2``."""

    through_origin = True

    def __init__(self, n_radial=64, n_angular=256):
        n_radial = int(n_radial)
        if n_radial < STENCIL + 1:
            raise ValueError(f"n_radial must be >= {STENCIL + 1}")
        h = 1.0 / (n_radial - 0.5)
        r = (np.arange(n_radial) + 0.5) * h
        r[-1] = 1.0
        super().__init__(r, n_angular)
        self.dr = h

    def __repr__(self):
        return f"DiscGrid(n_radial={self.n_radial}, n_angular={self.n_angular})"

    def refined(self, factor=2):
        return DiscGrid(self.n_radial * factor, self.n_angular * factor)

    def annulus_rows(self, inner_radius):
        """Row mask of nodes with ``inner_radius <= r``."""
        return self.radial_nodes >= inner_radius - 1e-14


class AnnulusGrid(PolarGrid):
    """Uniform polar grid on ``inner_radius <= |z| <= 1``."""

    def __init__(self, inner_radius, n_radial=32, n_angular=256):
        if not 0 < inner_radius < 1:
            raise ValueError("inner_radius must lie in (0, 1)")
        self.inner_radius = float(inner_radius)
        super().__init__(np.linspace(inner_radius, 1.0, int(n_radial)), n_angular)

    def __repr__(self):
        return (f"AnnulusGrid(inner_radius={self.inner_radius}, "
                f"n_radial={self.n_radial}, n_angular={self.n_angular})")


@dataclass
class GridFunction:
    """Complex values on the nodes of a grid."""

    values: np.ndarray
    grid: PolarGrid = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"expected shape {self.grid.shape}, got {self.values.shape}")

    @classmethod
    def from_callable(cls, grid, fn):
        """Sample ``fn(z)`` at the grid nodes."""
        return cls(np.broadcast_to(fn(grid.z), grid.shape).astype(complex), grid)

    @property
    def boundary(self):
        return self.values[-1]

    def is_finite(self):
        return bool(np.all(np.isfinite(self.values)))

    def _wrap(self, values):
        return GridFunction(values, self.grid)

    def __add__(self, other):
        return self._wrap(self.values + _vals(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - _vals(other))

    def __mul__(self, other):
        return self._wrap(self.values * _vals(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.values)

    def conj(self):
        return self._wrap(np.conj(self.values))

    # -- serialization ------------------------------------------------------
    def to_records(self):
        """(r, theta, Re, Im) records, angular-major (angle index outermost)."""
        g = self.grid
        R = g.R.T.ravel()
        T = g.TH.T.ravel()
        v = self.values.T.ravel()
        return np.column_stack([R, T, v.real, v.imag])

    @classmethod
    def from_records(cls, grid, records):
        rec = np.asarray(records, dtype=float).reshape(-1, 4)
        if len(rec) != grid.size:
            raise ValueError("record count does not match grid")
        ref = cls(np.zeros(grid.shape), grid).to_records()
        if not (np.allclose(rec[:, 0], ref[:, 0], atol=1e-12)
                and np.allclose(rec[:, 1], ref[:, 1], atol=1e-12)):
            raise ValueError("record node ordering does not match grid")
        v = (rec[:, 2] + 1j * rec[:, 3]).reshape(grid.n_angular, grid.n_radial).T
        return cls(v, grid)

    def save_csv(self, path):
        np.savetxt(path, self.to_records(), delimiter=",", header="r,theta,re,im",
                   comments="", fmt="%.17g")

    @classmethod
    def load_csv(cls, grid, path):
        return cls.from_records(grid, np.loadtxt(path, delimiter=",", skiprows=1))

    def save_binary(self, path):
        """Flat little-endian float64 records (r, theta, Re, Im)."""
        self.to_records().astype("<f8").tofile(path)

    @classmethod
    def load_binary(cls, grid, path):
        return cls.from_records(grid, np.fromfile(path, dtype="<f8"))


def _vals(x):
    return x.values if isinstance(x, GridFunction) else x


def _check_tail(f, threshold):
    if threshold is not None:
        tail = f.grid.spectral_tail(f.values)
        if tail > threshold:
            raise ResolutionError(f"angular spectrum tail {tail:.2e} above {threshold:.1e}")


def d_zbar(f, tail_threshold=1e-4):
    """Wirtinger derivative df/dzbar of a grid function."""
    _check_tail(f, tail_threshold)
    return GridFunction(f.grid.d_zbar(f.values), f.grid)


def d_z(f, tail_threshold=1e-4):
    """Wirtinger derivative df/dz of a grid function."""
    _check_tail(f, tail_threshold)
    return GridFunction(f.grid.d_z(f.values), f.grid)


def integrate(f):
    """Area integral of ``f`` over the grid's domain."""
    return f.grid.integrate(f.values)


def winding_number(curve):
    """Degree of a closed, nowhere-zero sampled curve.

    Sums principal-branch phase increments between consecutive samples
    (including the closing one).
    """
    c = np.asarray(curve, dtype=complex).ravel()
    if len(c) < 2:
        raise ValueError("need at least two samples")
    if np.any(c == 0) or not np.all(np.isfinite(c)):
        raise WindingError("curve passes through zero; winding undefined")
    d = np.angle(np.roll(c, -1) / c)
    if np.any(np.abs(d) >= np.pi * (1 - 1e-9)):
        raise ResolutionError("phase jump of pi between samples; refine the curve")
    return int(round(d.sum() / (2 * np.pi)))
