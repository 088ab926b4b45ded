"""Linear generalized Beltrami equation ``w_zbar = q w_z + Q``.

Particular solutions come from an exact right inverse of the discrete
``d/dzbar`` operator of the grid, built one angular mode at a time; the
holomorphic (disc) or Laurent (annulus) correction is fitted to a
Riemann-Hilbert condition on the boundary circle(s).  The full solve is the
Neumann-series iteration ``w <- T(q w_z + Q) + h``.
"""

from __future__ import annotations

import csv
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .errors import (AccuracyError, BoundaryError, DivergenceError,
                     EllipticityError, HypothesisError)
from .grid import DiscGrid, GridFunction, PolarGrid

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 500


# ---------------------------------------------------------------------------
# discrete Cauchy-Green operator
# ---------------------------------------------------------------------------

class DbarInverse:
    """Mode-wise right inverse of the grid's ``d/dzbar``.

    On angular mode ``m`` of the output, ``d/dzbar`` acts on input mode
    ``m - 1`` through the radial ODE ``(u' - m u / r) / 2``.  Each such
    matrix is made invertible by replacing its last (unit-circle) row with
    ``u(1) = 0``; on the disc this is only done for modes that carry a
    holomorphic kernel (``m >= 0``), since the radial ODE for ``m < 0`` is
    already uniquely solvable through the origin.  The replaced row is the
    only place the equation is not collocated, so residuals are judged on
    the remaining ("collocation") rows.

    The last column of each inverse is the discrete kernel profile ``p_m``
    with ``p_m(1) = 1``: ``p_m(r) e^{i m theta}`` is the discrete ``z^m``.
    """

    def __init__(self, grid: PolarGrid):
        self.grid = grid
        n, N = grid.shape
        r = grid.radial_nodes
        inv = np.empty((N, n, n))
        kernel = np.zeros(N, dtype=bool)
        # row replaced by the pinning condition; on an annulus the negative
        # modes (powers r^m that blow up inwards) are pinned at the inner
        # circle so that every kernel profile stays bounded by 1
        pin = np.full(N, n - 1)
        for i in range(N):
            L = 0.5 * (grid.radial_matrix(i) - np.diag(grid.modes_eff[i] / r))
            if not grid.through_origin or grid.modes[i] >= 0 or i == grid.nyquist:
                if not grid.through_origin and grid.modes[i] < 0 and i != grid.nyquist:
                    pin[i] = 0
                L = L.copy()
                L[pin[i]] = 0.0
                L[pin[i], pin[i]] = 1.0
                kernel[i] = True
            inv[i] = np.linalg.inv(L)
        self.inverses = inv
        self.kernel_modes = np.flatnonzero(kernel)
        self._kernel_mask = kernel
        self._pin = pin
        km = self.kernel_modes
        self.profiles = inv[km, :, pin[km]]  # (modes, n_radial)
        self._basis()

    def _basis(self):
        """Real parameterization of the kernel: Re and Im of each coefficient."""
        g = self.grid
        cols, imag = [], []
        for k, i in enumerate(self.kernel_modes):
            cols.append(k)
            imag.append(False)
            if i != g.nyquist:  # the Nyquist mode is real on the grid
                cols.append(k)
                imag.append(True)
        self.param_mode = np.array(cols)
        self.param_imag = np.array(imag)
        m = g.modes[self.kernel_modes][self.param_mode].astype(float)
        e = np.exp(1j * np.outer(g.theta, m))
        nyq = self.kernel_modes[self.param_mode] == g.nyquist
        e[:, nyq] = np.cos(g.n_angular / 2 * g.theta)[:, None]
        e[:, self.param_imag] *= 1j
        self.outer_basis = e * self.profiles[self.param_mode, -1][None, :]
        self.inner_basis = e * self.profiles[self.param_mode, 0][None, :]

    @property
    def collocation_rows(self):
        """Rows on which the equation is collocated for every mode."""
        return slice(0 if self.grid.through_origin else 1, self.grid.n_radial - 1)

    def apply(self, g):
        """Particular solution ``u`` with ``d_zbar(u) = g`` on collocation rows."""
        grid = self.grid
        rhs = np.roll(grid.to_modes(g), -1, axis=1)
        km = self.kernel_modes
        rhs[self._pin[km], km] = 0.0
        U = np.einsum("kij,jk->ik", self.inverses, rhs)
        return grid.from_modes(U)

    @property
    def nyquist_params(self):
        return self.kernel_modes[self.param_mode] == self.grid.nyquist

    def kernel_function(self, params, nyquist_phase=1.0):
        """Grid values of the kernel element with real parameters ``params``.

        The Nyquist mode has a single real parameter; ``nyquist_phase`` sets
        the complex direction it points in.
        """
        unit = np.where(self.param_imag, 1j, 1.0)
        unit = np.where(self.nyquist_params, nyquist_phase, unit)
        coef = np.zeros(len(self.kernel_modes), dtype=complex)
        np.add.at(coef, self.param_mode, unit * params)
        F = np.zeros(self.grid.shape, dtype=complex)
        F[:, self.kernel_modes] = self.profiles.T * coef[None, :]
        return self.grid.from_modes(F)


_CACHE: OrderedDict = OrderedDict()
_CACHE_SIZE = 6


def dbar_inverse(grid: PolarGrid) -> DbarInverse:
    """Cached :class:`DbarInverse` for a grid (keyed by its geometry)."""
    key = (grid.through_origin, grid.n_angular, grid.radial_nodes.tobytes())
    op = _CACHE.get(key)
    if op is None:
        op = DbarInverse(grid)
        _CACHE[key] = op
        while len(_CACHE) > _CACHE_SIZE:
            _CACHE.popitem(last=False)
    else:
        _CACHE.move_to_end(key)
    return op


def cauchy_green(g: GridFunction, tol=1e-8) -> GridFunction:
    """Particular solution of ``u_zbar = g`` on the disc.

    The result is the discrete Cauchy-Green transform
    ``-(1/pi) int g(zeta) / (zeta - z) dA``: its holomorphic part vanishes
    on the unit circle, which is how the continuous transform behaves.
    The residual is checked a posteriori on the collocation rows.
    """
    if not isinstance(g.grid, DiscGrid):
        raise TypeError("cauchy_green needs a DiscGrid")
    if not g.is_finite():
        raise ValueError("non-finite source")
    op = dbar_inverse(g.grid)
    u = op.apply(g.values)
    res = np.abs(g.grid.d_zbar(u) - g.values)[op.collocation_rows].max(initial=0.0)
    scale = max(1.0, float(np.abs(g.values).max(initial=0.0)))
    if not res <= tol * scale:
        raise AccuracyError(f"Cauchy-Green residual {res:.2e} above {tol:.1e}")
    return GridFunction(u, g.grid)


# ---------------------------------------------------------------------------
# boundary conditions
# ---------------------------------------------------------------------------

@dataclass
class RiemannHilbert:
    """``Re(conj(lam) w) = phi`` on the unit circle plus one anchor condition.

    The anchor fixes the remaining real degree of freedom:
    ``Im(conj(anchor) w(1)) = nu``.  On an annulus an inner condition
    ``Re(conj(inner_lam) w) = inner_phi`` on ``|z| = inner_radius`` is also
    required.
    """

    lam: np.ndarray
    phi: np.ndarray
    nu: float = 0.0
    anchor: complex | None = None
    inner_lam: np.ndarray | None = None
    inner_phi: np.ndarray | None = None

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=complex)
        self.phi = np.broadcast_to(np.asarray(self.phi, dtype=float), self.lam.shape).copy()
        if np.any(np.abs(self.lam) == 0):
            raise ValueError("Riemann-Hilbert coefficient vanishes on the circle")
        if self.anchor is None:
            self.anchor = complex(self.lam[0])

    @classmethod
    def re_trace(cls, phi, nu=0.0, n_angular=None, inner_phi=None):
        """``Re w = phi`` on the circle and ``Im w(1) = nu``."""
        phi = np.asarray(phi, dtype=float)
        if phi.ndim == 0:
            phi = np.full(int(n_angular), float(phi))
        inner_lam = None
        if inner_phi is not None:
            inner_phi = np.broadcast_to(np.asarray(inner_phi, dtype=float), phi.shape)
            inner_lam = np.ones(len(phi), dtype=complex)
        return cls(np.ones(len(phi), dtype=complex), phi, nu, 1.0, inner_lam, inner_phi)

    @classmethod
    def matching(cls, w_exact: GridFunction):
        """Re-trace condition reproducing a known solution's boundary data."""
        v = w_exact.values
        inner = None if w_exact.grid.through_origin else v[0].real
        return cls.re_trace(v[-1].real, float(v[-1, 0].imag), inner_phi=inner)


@dataclass
class ModulusCondition:
    """``|w| = t`` on the unit circle with ``w(1) = anchor`` (``|anchor| = t``).

    Nonlinear; the solver re-linearizes it every sweep as
    ``Re(conj(w_k) w) = (t^2 + |w_k|^2) / 2``.
    """

    t: float
    anchor: complex

    def linearize(self, w_boundary):
        lam = np.asarray(w_boundary, dtype=complex)
        if np.any(np.abs(lam) == 0):
            raise HypothesisError("iterate vanishes on the circle")
        phi = 0.5 * (self.t**2 + np.abs(lam) ** 2)
        nu = float(np.imag(np.conj(lam[0]) * self.anchor))
        return RiemannHilbert(lam, phi, nu, anchor=lam[0])


def fit_correction(op: DbarInverse, bc: RiemannHilbert, u):
    """Kernel element ``h`` so that ``u + h`` satisfies ``bc``."""
    # the Nyquist column is real-parameterized; point it along the phase
    # where it is best seen by Re(conj(lam) .), or it degenerates for
    # purely imaginary lam
    nyq_phase = np.exp(0.5j * np.angle(np.sum(bc.lam**2)))
    turn = np.where(op.nyquist_params, nyq_phase, 1.0)
    B = op.outer_basis * turn
    rows = [np.real(np.conj(bc.lam)[:, None] * B),
            np.imag(np.conj(bc.anchor) * B[0])[None, :]]
    rhs = [bc.phi - np.real(np.conj(bc.lam) * u[-1]),
           [bc.nu - np.imag(np.conj(bc.anchor) * u[-1, 0])]]
    if not op.grid.through_origin:
        if bc.inner_lam is None:
            raise ValueError("annulus problems need an inner boundary condition")
        rows.append(np.real(np.conj(bc.inner_lam)[:, None] * op.inner_basis * turn))
        rhs.append(bc.inner_phi - np.real(np.conj(bc.inner_lam) * u[0]))
    M = np.vstack(rows)
    b = np.concatenate(rhs)
    if M.shape[0] == M.shape[1]:
        x = np.linalg.solve(M, b)
    else:
        x = np.linalg.lstsq(M, b, rcond=None)[0]
    return op.kernel_function(x, nyq_phase)


# ---------------------------------------------------------------------------
# problem / solution types
# ---------------------------------------------------------------------------

@dataclass
class BeltramiProblem:
    """Coefficients of ``w_zbar = q w_z + Q`` on a disc or annulus grid."""

    q: GridFunction
    Q: GridFunction

    def __post_init__(self):
        if self.q.grid is not self.Q.grid:
            raise ValueError("q and Q must live on the same grid")
        if not (self.q.is_finite() and self.Q.is_finite()):
            raise ValueError("non-finite coefficients")
        self.q0 = float(np.abs(self.q.values).max())
        self.Q0 = float(np.abs(self.Q.values).max())
        if self.q0 >= 1.0:
            raise EllipticityError(f"q0 = {self.q0:.6g} is not below 1")

    @property
    def grid(self):
        return self.q.grid

    @classmethod
    def manufactured(cls, w_exact: GridFunction, q: GridFunction):
        """Problem solved exactly (up to discretization) by ``w_exact``."""
        g = w_exact.grid
        Q = g.d_zbar(w_exact.values) - q.values * g.d_z(w_exact.values)
        return cls(q, GridFunction(Q, g))


@dataclass
class BeltramiSolution:
    """Converged solution with residual diagnostics.

    ``residual_norm`` is measured on the collocation rows; the unit-circle
    row, where the boundary condition replaces the equation, is reported
    separately as ``boundary_row_residual`` (it carries only the one-sided
    stencil's truncation error).
    """

    w: GridFunction
    residual_norm: float
    boundary_row_residual: float
    iterations: int
    history: list = field(default_factory=list, repr=False)
    holder_norm_report: dict = field(default_factory=dict)

    def write_history(self, path):
        """CSV dump of ``(iteration, residual, update)`` for convergence plots."""
        write_history_csv(path, self.history)


def write_history_csv(path, history):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["iteration", "residual", "update"])
        for i, (res, upd) in enumerate(history, start=1):
            out.writerow([i, f"{res:.17g}", f"{upd:.17g}"])


def beltrami_residual(grid, w, q, Q):
    """Nodewise ``w_zbar - q w_z - Q``."""
    return grid.d_zbar(w) - q * grid.d_z(w) - Q


def _split_residual(grid, res):
    """(collocation-row max, boundary-row max) of a residual field."""
    a = np.abs(res)
    inner = slice(0 if grid.through_origin else 1, grid.n_radial - 1)
    edge = a[-1] if grid.through_origin else np.maximum(a[0], a[-1])
    return float(a[inner].max()), float(edge.max())


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------

def solve_beltrami(problem: BeltramiProblem, boundary_condition=None, *,
                   w_init=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
                   stall_window=25, history_path=None,
                   holder_alpha=0.5, holder_delta=0.15) -> BeltramiSolution:
    """Fixed-point solve of ``w_zbar = q w_z + Q`` with a boundary condition.

    ``boundary_condition`` is a :class:`RiemannHilbert` (linear) or a
    :class:`ModulusCondition`; the default is ``Re w = 0`` on the circle(s)
    with ``w(1) = 0``.  Each sweep computes ``u = T(q w_z + Q)`` and adds the
    kernel element fixing the boundary condition.  Stops when the
    collocation residual drops below ``tol``; raises :class:`DivergenceError`
    when the best residual has not improved for ``stall_window`` sweeps.
    """
    grid = problem.grid
    op = dbar_inverse(grid)
    q, Q = problem.q.values, problem.Q.values
    bc = boundary_condition
    if bc is None:
        inner = None if grid.through_origin else 0.0
        bc = RiemannHilbert.re_trace(0.0, 0.0, grid.n_angular, inner_phi=inner)
    if isinstance(bc, ModulusCondition):
        linearize = bc.linearize
        if w_init is None:
            w_init = GridFunction(np.full(grid.shape, bc.anchor, dtype=complex), grid)
    else:
        linearize = None

    w = np.zeros(grid.shape, dtype=complex) if w_init is None else np.array(w_init.values)
    history = []
    best, best_at = np.inf, 0
    for it in range(1, max_iter + 1):
        u = op.apply(q * grid.d_z(w) + Q)
        cond = linearize(w[-1]) if linearize else bc
        w_new = u + fit_correction(op, cond, u)
        res, res_b = _split_residual(grid, beltrami_residual(grid, w_new, q, Q))
        if linearize:
            res = max(res, float(np.abs(np.abs(w_new[-1]) - bc.t).max()))
        history.append((res, float(np.abs(w_new - w).max())))
        w = w_new
        if not np.isfinite(res):
            raise DivergenceError("iteration produced non-finite values", history)
        if res < tol:
            break
        if res < best * (1 - 1e-3):
            best, best_at = res, it
        elif it - best_at >= stall_window:
            raise DivergenceError(
                f"residual stalled at {best:.3e} (q0 = {problem.q0:.3f}, "
                f"{it} sweeps)", history)
    else:
        raise DivergenceError(f"no convergence in {max_iter} sweeps "
                              f"(residual {history[-1][0]:.3e})", history)

    w_fn = GridFunction(w, grid)
    sol = BeltramiSolution(w_fn, res, res_b, it, history)
    sol.holder_norm_report = {
        "alpha": holder_alpha, "delta_prime": holder_delta,
        "seminorm": holder_monitor(w_fn, holder_alpha, holder_delta)}
    if history_path is not None:
        sol.write_history(history_path)
    return sol


# ---------------------------------------------------------------------------
# norm monitoring and reflection
# ---------------------------------------------------------------------------

def holder_monitor(w: GridFunction, alpha=0.5, delta_prime=0.15, max_nodes=3000):
    """Discrete Hoelder seminorm ``max |w(x) - w(y)| / |x - y|^alpha``.

    Taken over node pairs in ``1 - delta_prime <= |z| <= 1``; the node set
    is thinned by a fixed angular stride when it exceeds ``max_nodes``.
    """
    g = w.grid
    rows = np.flatnonzero((g.radial_nodes >= 1 - delta_prime - 1e-14)
                          & (g.radial_nodes <= 1 + 1e-14))
    if len(rows) == 0:
        return 0.0
    stride = 1
    while len(rows) * g.n_angular // stride > max_nodes and stride < g.n_angular:
        stride *= 2
    z = g.z[rows][:, ::stride].ravel()
    v = w.values[rows][:, ::stride].ravel()
    best = 0.0
    for s in range(0, len(z), 512):
        dz = np.abs(z[s:s + 512, None] - z[None, :])
        dv = np.abs(v[s:s + 512, None] - v[None, :])
        ok = dz > 0
        if ok.any():
            best = max(best, float((dv[ok] / dz[ok] ** alpha).max()))
    return best


@dataclass
class Reflection:
    """Fields reflected across the unit circle, on the mirrored grid."""

    w: GridFunction
    q: GridFunction
    Q: GridFunction
    eps: float
    q0: float
    Q0: float
    residual: float

    @property
    def grid(self):
        return self.w.grid

    @property
    def q_bound(self):
        return float(np.abs(self.q.values).max())

    @property
    def Q_bound(self):
        return float(np.abs(self.Q.values).max())


def reflect_extend(w: GridFunction, q: GridFunction, Q: GridFunction,
                   boundary_tol=1e-8, collar=0.5) -> Reflection:
    """Reflect a solution of ``w_zbar = q w_z + Q`` across the unit circle.

    With ``z* = 1/conj(z)`` the mirrored fields are ``w(z) = 1/conj(w(z*))``,
    ``q(z) = conj(q(z*)) z^2 (z*)^2`` and
    ``Q(z) = conj(Q(z*)) (z*)^2 w(z)^2``; they live on the grid with radii
    ``1/r`` and satisfy the same equation there.  ``eps`` is measured as
    ``min(min|w|, 1/max|w|)``.  ``residual`` is the discrete residual on the
    mirror of the collar ``collar <= |z| <= 1``; nearer the origin the
    mirrored nodes are too sparse for the stencils to mean anything.
    """
    g = w.grid
    r = g.radial_nodes
    on_circle = np.flatnonzero(np.abs(r - 1.0) < 1e-14)
    if len(on_circle) == 0:
        raise BoundaryError("grid has no unit-circle layer")
    vals = w.values
    mod = np.abs(vals)
    if not np.all(np.isfinite(vals)) or mod.min() == 0:
        raise HypothesisError("|w| must stay in [eps, 1/eps] for some eps > 0")
    eps = float(min(mod.min(), 1.0 / mod.max()))
    dev = float(np.abs(mod[on_circle[0]] - 1.0).max())
    if dev > boundary_tol:
        raise BoundaryError(f"|w| deviates from 1 on the circle by {dev:.2e}")

    mirror = PolarGrid(1.0 / r[::-1], g.n_angular)
    zs = g.z[::-1]                 # z* for each mirrored node
    zm = mirror.z
    w_ext = 1.0 / np.conj(vals[::-1])
    q_ext = np.conj(q.values[::-1]) * zm**2 * zs**2
    Q_ext = np.conj(Q.values[::-1]) * zs**2 * w_ext**2
    near = mirror.radial_nodes <= 1.0 / collar + 1e-14
    res = np.abs(beltrami_residual(mirror, w_ext, q_ext, Q_ext))[near].max()
    return Reflection(GridFunction(w_ext, mirror), GridFunction(q_ext, mirror),
                      GridFunction(Q_ext, mirror), eps,
                      float(np.abs(q.values).max()), float(np.abs(Q.values).max()),
                      float(res))
