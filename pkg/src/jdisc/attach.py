"""J-complex discs with boundary on the tori ``bD x t bD``.

A disc is the graph ``zeta -> (zeta, W(zeta))`` over the closed unit disc.
For a structure with matrix ``A`` the graph is J-complex (after a
reparametrization of the source) exactly when

    W_zbar + mu W_z = a21 + a22 conj(W_z) + a22 mu conj(W_zbar),
    mu = (a11 + a12 conj(W_z)) / (1 - a12 conj(W_zbar)),

with ``A`` evaluated at ``(zeta, W(zeta))``.  For triangular structures
(``a12 = a22 = 0``) this is ``W_zbar + a W_z = b``.  The boundary condition
is ``|W| = t`` on the circle with ``W(1) = t e^{i tau}`` and zero winding.

Each sweep freezes the coefficients at the current iterate, computes one
Cauchy-Green particular solution and fits the holomorphic correction to the
Newton-linearized modulus condition; Anderson mixing accelerates the sweeps.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .beltrami import ModulusCondition, dbar_inverse, fit_correction
from .errors import AttachFailure, DegeneracyError, HomotopyClassError, ResolutionError
from .grid import DiscGrid, GridFunction, winding_number
from .structures import AlmostComplexStructure, TriangularStructure, to_real

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class TorusTarget:
    """The torus ``R bD x t bD``; discs are graphs over ``R D``."""

    t: float
    R: float = 1.0

    def __post_init__(self):
        if not (self.t > 0 and self.R > 0):
            raise ValueError("torus radii must be positive")

    def sample(self, n_phi=64, n_psi=64):
        """Grid of points on the torus as complex pairs."""
        phi = 2 * np.pi * np.arange(n_phi) / n_phi
        psi = 2 * np.pi * np.arange(n_psi) / n_psi
        P, S = np.meshgrid(phi, psi, indexing="ij")
        return self.R * np.exp(1j * P), self.t * np.exp(1j * S)

    def is_totally_real(self, structure, n=64):
        """Sampled check: tangent plane meets its J-image only in 0."""
        z, w = self.sample(8, n // 8)
        z, w = z.ravel(), w.ravel()
        J = _structure_J(structure, z, w)
        T1 = to_real(1j * z, 0 * w)
        T2 = to_real(0 * z, 1j * w)
        B = np.stack([T1, T2, np.einsum("nij,nj->ni", J, T1),
                      np.einsum("nij,nj->ni", J, T2)], axis=-1)
        return bool(np.all(np.abs(np.linalg.det(B)) > 1e-10))


def _structure_J(structure, z, w):
    from .structures import structure_from_matrix
    return structure_from_matrix(structure.matrix(z, w))


@dataclass
class DiscSolution:
    """A graph disc ``W`` with its verification data."""

    w: GridFunction
    t: float
    tau: float
    residual_norm: float
    boundary_deviation: float
    winding: int
    normalization_error: float
    min_modulus: float
    iterations: int = 0
    boundary_row_residual: float = 0.0
    area: float | None = None
    boundary_area: float | None = None
    history: list = field(default_factory=list, repr=False)

    @property
    def grid(self):
        return self.w.grid

    @property
    def values(self):
        return self.w.values

    def metadata(self):
        keys = ("t", "tau", "residual_norm", "boundary_deviation", "winding",
                "normalization_error", "min_modulus", "iterations",
                "boundary_row_residual", "area", "boundary_area")
        meta = {k: getattr(self, k) for k in keys}
        meta["grid"] = [self.grid.n_radial, self.grid.n_angular]
        return meta

    def save(self, path):
        """Metadata header (one JSON comment line) followed by CSV records."""
        with open(path, "w") as fh:
            fh.write("# " + json.dumps(_jsonable(self.metadata())) + "\n")
            fh.write("r,theta,re,im\n")
            np.savetxt(fh, self.w.to_records(), delimiter=",", fmt="%.17g")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            meta = json.loads(fh.readline()[2:])
        grid = DiscGrid(*meta.pop("grid"))
        rec = np.loadtxt(path, delimiter=",", skiprows=2)
        w = GridFunction.from_records(grid, rec)
        return cls(w=w, **meta)


def _jsonable(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, (np.floating, np.integer)):
            v = v.item()
        out[k] = v
    return out


# ---------------------------------------------------------------------------
# coefficients of the graph equation
# ---------------------------------------------------------------------------

def graph_coefficients(structure, grid, W, Wz=None, Wzb=None):
    """``(q, Q)`` with the graph equation written as ``W_zbar = q W_z + Q``."""
    z = grid.z
    if isinstance(structure, TriangularStructure):
        return -structure.a(z, W), structure.b(z, W)
    A = structure.matrix(z, W)
    a11, a12, a21, a22 = A[..., 0, 0], A[..., 0, 1], A[..., 1, 0], A[..., 1, 1]
    if not (np.any(a12) or np.any(a22)):
        return -a11, a21
    if Wz is None:
        Wz, Wzb = grid.d_z(W), grid.d_zbar(W)
    mu = (a11 + a12 * np.conj(Wz)) / (1 - a12 * np.conj(Wzb))
    # terms in conj(W_z) are not of the form q W_z; they go into Q
    return -mu, a21 + a22 * np.conj(Wz) + a22 * mu * np.conj(Wzb)


def graph_residual(structure, grid, W):
    """Nodewise residual of the graph equation."""
    Wz, Wzb = grid.d_z(W), grid.d_zbar(W)
    q, Q = graph_coefficients(structure, grid, W, Wz, Wzb)
    return Wzb - q * Wz - Q


# ---------------------------------------------------------------------------
# Anderson mixing
# ---------------------------------------------------------------------------

class Anderson:
    """Type-II Anderson mixing for ``x = G(x)`` on real vectors."""

    def __init__(self, depth=6, restart_growth=10.0):
        self.depth = depth
        self.restart_growth = restart_growth
        self.reset()

    def reset(self):
        self.dF, self.dG = [], []
        self.prev = None
        self.best = np.inf

    def step(self, x, g):
        f = g - x
        norm = np.linalg.norm(f)
        if norm > self.restart_growth * self.best:
            self.reset()
        self.best = min(self.best, norm)
        if self.prev is not None:
            pf, pg = self.prev
            self.dF.append(f - pf)
            self.dG.append(g - pg)
            if len(self.dF) > self.depth:
                self.dF.pop(0)
                self.dG.pop(0)
        self.prev = (f, g)
        if not self.dF:
            return g
        F = np.stack(self.dF, axis=1)
        G = np.stack(self.dG, axis=1)
        gamma = np.linalg.lstsq(F, f, rcond=1e-12)[0]
        return g - G @ gamma


def _pack(w):
    return np.concatenate([w.real.ravel(), w.imag.ravel()])


def _unpack(x, shape):
    n = x.size // 2
    return (x[:n] + 1j * x[n:]).reshape(shape)


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------

def attach_disc(structure, target: TorusTarget, tau=0.0, w_init=None, *, grid=None,
                tol=DEFAULT_TOL, max_iter=300, anderson_depth=6,
                stall_window=40) -> DiscSolution:
    """Solve for the disc with boundary on ``target`` through ``(1, t e^{i tau})``.

    ``structure`` is a :class:`TriangularStructure` or an
    :class:`AlmostComplexStructure` (general graph equation).  ``w_init``
    defaults to the flat disc ``t e^{i tau}``; its grid is used when given.
    Raises :class:`DegeneracyError` if an iterate touches ``w = 0``,
    :class:`HomotopyClassError` if the boundary winding becomes nonzero and
    :class:`AttachFailure` on non-convergence.
    """
    if target.R != 1.0:
        raise ValueError("graphs are taken over the unit disc; rescale z first")
    t = float(target.t)
    anchor = t * np.exp(1j * tau)
    if w_init is None:
        grid = grid or DiscGrid()
        w = np.full(grid.shape, anchor, dtype=complex)
    else:
        grid = w_init.grid
        w = np.array(w_init.values, dtype=complex)
        if np.abs(w).min() == 0:
            raise DegeneracyError("initial guess vanishes somewhere")
        if winding_number(w[-1]) != 0:
            raise HomotopyClassError("initial guess has nonzero winding")
    op = dbar_inverse(grid)
    bc = ModulusCondition(t, anchor)
    mixer = Anderson(anderson_depth) if anderson_depth else None
    history = []
    best, best_at = np.inf, 0
    x = _pack(w)
    for it in range(1, max_iter + 1):
        Wz, Wzb = grid.d_z(w), grid.d_zbar(w)
        q, Q = graph_coefficients(structure, grid, w, Wz, Wzb)
        res_field = Wzb - q * Wz - Q
        res = float(np.abs(res_field[:-1]).max())
        bdev = float(np.abs(np.abs(w[-1]) - t).max())
        nerr = float(abs(w[-1, 0] - anchor))
        history.append((res, bdev))
        if not np.isfinite(res):
            raise AttachFailure("non-finite iterate", res, history)
        if res < tol and bdev < tol and nerr < tol:
            break
        merit = max(res, bdev)
        if merit < best * (1 - 1e-3):
            best, best_at = merit, it
        elif it - best_at >= stall_window:
            raise AttachFailure(f"stalled at residual {best:.3e} after {it} sweeps",
                                best, history)
        u = op.apply(q * Wz + Q)
        g = u + fit_correction(op, bc.linearize(w[-1]), u)
        x = mixer.step(x, _pack(g)) if mixer else _pack(g)
        w = _unpack(x, grid.shape)
        if np.abs(w).min() < 1e-9 * t:
            raise DegeneracyError("iterate touched w = 0", res, history)
    else:
        raise AttachFailure(f"no convergence in {max_iter} sweeps (residual {res:.3e})",
                            res, history)
    return _finish(structure, grid, w, t, tau, it, history)


def _finish(structure, grid, w, t, tau, iterations, history):
    res_field = graph_residual(structure, grid, w)
    try:
        wind = winding_number(w[-1])
    except ResolutionError:
        wind = None
    sol = DiscSolution(
        w=GridFunction(w, grid), t=t, tau=float(tau),
        residual_norm=float(np.abs(res_field[:-1]).max()),
        boundary_deviation=float(np.abs(np.abs(w[-1]) - t).max()),
        winding=wind,
        normalization_error=float(abs(w[-1, 0] - t * np.exp(1j * tau))),
        min_modulus=float(np.abs(w).min()),
        iterations=iterations,
        boundary_row_residual=float(np.abs(res_field[-1]).max()),
        history=history)
    if sol.winding != 0:
        raise HomotopyClassError(f"boundary winding {sol.winding}", sol.residual_norm, history)
    return sol


def flat_disc(t, tau=0.0, grid=None) -> DiscSolution:
    """The disc ``W = t e^{i tau}`` (exact for ``J_st``)."""
    grid = grid or DiscGrid()
    w = GridFunction(np.full(grid.shape, t * np.exp(1j * tau), dtype=complex), grid)
    return DiscSolution(w, float(t), float(tau), 0.0, 0.0, 0, 0.0, float(t))


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass
class AdmissibilityReport:
    """Outcome of the per-disc admissibility checks."""

    boundary_deviation: float
    winding: int | None
    normalization_error: float
    min_modulus: float
    embedding_distance: float
    second_point_check: bool = True
    tol: float = 1e-8
    failures: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.failures

    def as_dict(self):
        d = asdict(self)
        d["ok"] = self.ok
        return d


def verify_admissible_disc(s: DiscSolution, target: TorusTarget | None = None,
                           tol=1e-8) -> AdmissibilityReport:
    """Re-check boundary, winding, normalization, non-vanishing and embedding.

    The graph ``zeta -> (zeta, W)`` is injective by construction, so the
    embedding proxy is the smallest distance between distinct nodes' graph
    points, which is at least the node separation in ``zeta``.  The second
    normalization point of the source disc is automatic for graphs and is
    recorded as passed.
    """
    t = s.t if target is None else target.t
    w = s.w.values
    grid = s.grid
    bdev = float(np.abs(np.abs(w[-1]) - t).max())
    try:
        wind = winding_number(w[-1])
    except Exception:  # curve through zero or under-resolved
        wind = None
    nerr = float(abs(w[-1, 0] - t * np.exp(1j * s.tau)))
    min_mod = float(np.abs(w).min())
    # nearest graph points along each ring (the closest pairs on a polar grid)
    z = grid.z
    d_ang = np.abs(np.roll(z, -1, axis=1) - z)
    d_rad = np.abs(np.diff(z, axis=0))
    embed = float(min(d_ang.min(), d_rad.min()))
    report = AdmissibilityReport(bdev, wind, nerr, min_mod, embed, True, tol)
    if bdev > tol:
        report.failures.append("boundary")
    if wind != 0:
        report.failures.append("winding")
    if nerr > tol:
        report.failures.append("normalization")
    if not min_mod > 0:
        report.failures.append("vanishing")
    if not embed > 0:
        report.failures.append("embedding")
    return report


def fine_grid_residual(structure, s: DiscSolution, factor=2, margin=0.9):
    """Residual of the interpolated solution on a finer grid.

    The coarse solution is interpolated to the ``factor``-times finer grid
    and the graph equation is evaluated there with that grid's own
    derivatives, on radii up to ``margin`` (the interpolant's one-sided
    boundary stencils are excluded).
    """
    fine = s.grid.refined(factor)
    W = s.grid.evaluate(s.w.values, fine.z)
    res = graph_residual(structure, fine, W)
    rows = fine.radial_nodes <= margin
    return float(np.abs(res[rows]).max())
