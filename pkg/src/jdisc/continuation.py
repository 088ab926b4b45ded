"""Continuation of disc families in ``t`` and the foliation they span.

Starting from flat discs at ``t_start``, the levels are marched upward; at
each level every phase ``tau`` is re-solved from the previous level's disc
(scaled to the new modulus) with :func:`attach_disc`.  A failed level halves
the step; three successes in a row grow it by 1.5.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar, root

from .attach import TorusTarget, attach_disc, verify_admissible_disc
from .beltrami import holder_monitor
from .errors import AttachFailure, ContinuationBreakdown
from .grid import DiscGrid, GridFunction
from .symplectic import SymplecticContext, area, boundary_area, boundary_length


@dataclass
class ContinuationConfig:
    """Step control, tolerances and resolution of a continuation run."""

    t_start: float = 0.1
    t_end: float = 1.0
    initial_step: float = 0.05
    shrink: float = 0.5
    grow: float = 1.5
    grow_after: int = 3
    min_step: float = 1e-4
    max_step: float = 0.2
    n_tau: int = 16
    tol: float = 1e-10
    max_iter: int = 300
    n_radial: int = 64
    n_angular: int = 256
    t_levels: list | None = None   # explicit levels (no step control)
    perturb_init: float = 0.0      # relative size of initial-guess noise
    seed: int = 0
    delta: float = 0.3             # collar of the Hartogs model
    delta_prime: float = 0.15      # monitoring sub-annulus
    holder_alpha: float = 0.5

    def __post_init__(self):
        if not 0 < self.t_start <= self.t_end <= 1:
            raise ValueError("need 0 < t_start <= t_end <= 1")
        if self.n_tau < 1 or self.initial_step <= 0 or self.min_step <= 0:
            raise ValueError("n_tau and steps must be positive")

    def grid(self):
        return DiscGrid(self.n_radial, self.n_angular)

    @property
    def tau_grid(self):
        return 2 * np.pi * np.arange(self.n_tau) / self.n_tau


@dataclass
class Foliation:
    """Discs ``w^{t, tau}`` on a ``(t_levels x tau_grid)`` lattice."""

    t_levels: list
    tau_grid: np.ndarray
    discs: list                     # discs[i][k] at (t_levels[i], tau_grid[k])
    config: ContinuationConfig
    admissibility_report: dict = field(default_factory=dict)
    complete: bool = True

    @property
    def grid(self):
        return self.discs[0][0].grid

    def level(self, t):
        i = int(np.argmin(np.abs(np.asarray(self.t_levels) - t)))
        if abs(self.t_levels[i] - t) > 1e-12:
            raise KeyError(f"no level at t = {t}")
        return i

    def all_discs(self):
        return [d for row in self.discs for d in row]

    def values(self):
        """Array ``(levels, n_tau, n_radial, n_angular)`` of all ``W``."""
        return np.array([[d.w.values for d in row] for row in self.discs])

    def gamma_surface(self, t):
        """Point cloud of ``Gamma^t``: arrays ``(z, w)`` of shape ``(n_tau, nr, na)``."""
        row = self.discs[self.level(t)]
        z = np.broadcast_to(self.grid.z, (len(row),) + self.grid.shape)
        return z, np.array([d.w.values for d in row])


# ---------------------------------------------------------------------------
# marching
# ---------------------------------------------------------------------------

def _smooth_noise(rng, grid, size):
    """Small nowhere-large holomorphic polynomial ``1 + size * p(z)``."""
    c = (rng.normal(size=4) + 1j * rng.normal(size=4)) / 4
    z = grid.z
    return 1.0 + size * sum(ck * z**k for k, ck in enumerate(c, start=1)) / 2


def _solve_level(structure, t, taus, guesses, cfg, rng):
    discs = []
    for tau, guess in zip(taus, guesses):
        if cfg.perturb_init:
            guess = GridFunction(guess.values * _smooth_noise(rng, guess.grid, cfg.perturb_init),
                                 guess.grid)
        discs.append(attach_disc(structure, TorusTarget(t), tau, guess,
                                 tol=cfg.tol, max_iter=cfg.max_iter))
    return discs


def _flat_guesses(t, taus, grid):
    return [GridFunction(np.full(grid.shape, t * np.exp(1j * tau)), grid) for tau in taus]


def run_continuation(structure, cfg: ContinuationConfig | None = None, *,
                     ctx: SymplecticContext | None = None, check=True,
                     progress=None) -> Foliation:
    """March the disc family from ``t_start`` to ``t_end``.

    With ``cfg.t_levels`` set, exactly those levels are solved (used for
    restart comparisons).  Raises :class:`ContinuationBreakdown` carrying
    the partial foliation when the step underflows ``min_step``.
    """
    cfg = cfg or ContinuationConfig()
    grid = cfg.grid()
    taus = cfg.tau_grid
    rng = np.random.default_rng(cfg.seed)
    levels, rows = [], []

    def guesses_for(t):
        if not rows:
            return _flat_guesses(t, taus, grid)
        s = t / levels[-1]
        return [GridFunction(d.w.values * s, grid) for d in rows[-1]]

    t0 = cfg.t_start if cfg.t_levels is None else float(cfg.t_levels[0])
    try:
        rows.append(_solve_level(structure, t0, taus, _flat_guesses(t0, taus, grid), cfg, rng))
    except AttachFailure as exc:
        raise ContinuationBreakdown(f"no disc at the starting level: {exc}", None) from exc
    levels.append(t0)
    if progress:
        progress(levels[-1])

    def partial():
        return Foliation(list(levels), taus, list(rows), cfg, complete=False)

    if cfg.t_levels is not None:
        for t in cfg.t_levels[1:]:
            try:
                rows.append(_solve_level(structure, t, taus, guesses_for(t), cfg, rng))
            except AttachFailure as exc:
                raise ContinuationBreakdown(f"level t = {t} failed: {exc}",
                                            levels[-1], partial()) from exc
            levels.append(float(t))
            if progress:
                progress(t)
    else:
        step = cfg.initial_step
        streak = 0
        while levels[-1] < cfg.t_end - 1e-14:
            # avoid a sliver of a last step: absorb or split the remainder
            rest = cfg.t_end - levels[-1]
            if rest <= 1.5 * step:
                t = cfg.t_end
            elif rest < 2 * step:
                t = levels[-1] + rest / 2
            else:
                t = levels[-1] + step
            try:
                row = _solve_level(structure, t, taus, guesses_for(t), cfg, rng)
            except AttachFailure:
                step *= cfg.shrink
                streak = 0
                if step < cfg.min_step:
                    raise ContinuationBreakdown(
                        f"step underflow beyond t = {levels[-1]:.6g}", levels[-1], partial())
                continue
            levels.append(float(t))
            rows.append(row)
            if progress:
                progress(t)
            streak += 1
            if streak >= cfg.grow_after:
                step = min(step * cfg.grow, cfg.max_step)
                streak = 0

    F = Foliation(levels, taus, rows, cfg)
    if check:
        F.admissibility_report = admissibility_report(F, ctx)
    return F


def trace_disc(structure, tau, t_start, t_end, *, grid=None, step=0.1, shrink=0.5,
               grow=1.5, grow_after=3, min_step=1e-4, tol=1e-10, max_iter=300,
               w_init=None):
    """Follow the single disc of phase ``tau`` from ``t_start`` to ``t_end``.

    Same predictor and step control as :func:`run_continuation`, for runs
    that need one member of the family only.  Returns the disc at ``t_end``.
    """
    grid = grid or DiscGrid()
    if w_init is None:
        w_init = GridFunction(np.full(grid.shape, t_start * np.exp(1j * tau)), grid)
    try:
        disc = attach_disc(structure, TorusTarget(t_start), tau, w_init, tol=tol,
                           max_iter=max_iter)
    except AttachFailure as exc:
        raise ContinuationBreakdown(f"no disc at t = {t_start}: {exc}", None) from exc
    t, streak = t_start, 0
    sign = 1.0 if t_end >= t_start else -1.0
    while sign * (t_end - t) > 1e-14:
        rest = abs(t_end - t)
        t_new = t_end if rest <= 1.5 * step else t + sign * step
        guess = GridFunction(disc.w.values * (t_new / t), grid)
        try:
            disc = attach_disc(structure, TorusTarget(t_new), tau, guess, tol=tol,
                               max_iter=max_iter)
        except AttachFailure:
            step *= shrink
            streak = 0
            if step < min_step:
                raise ContinuationBreakdown(f"step underflow beyond t = {t:.6g}", t)
            continue
        t = t_new
        streak += 1
        if streak >= grow_after:
            step *= grow
            streak = 0
    return disc


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def separation_threshold(grid):
    """Resolution scale for distance checks: twice the radial node spacing."""
    return 2.0 * float(np.max(np.diff(grid.radial_nodes)))


def graph_separations(F: Foliation):
    """Minimum vertical gaps ``min_z |W_1 - W_2|`` within and across levels.

    Two graphs over the same base meet exactly where this gap vanishes; the
    gap also bounds the 4D distance of the two graphs from above.
    """
    V = F.values()
    L, K = V.shape[:2]
    flat = V.reshape(L * K, -1)
    level_of = np.repeat(np.arange(L), K)
    same, cross = np.inf, np.inf
    for i in range(L * K - 1):
        gaps = np.abs(flat[i + 1:] - flat[i]).min(axis=1)
        lv = level_of[i + 1:] == level_of[i]
        if lv.any():
            same = min(same, float(gaps[lv].min()))
        if (~lv).any():
            cross = min(cross, float(gaps[~lv].min()))
    return same, cross


def _family_at(F: Foliation, z_points):
    """``e^{-i tau} W^{t, tau}(z)`` at the sample bases, per level and phase."""
    grid = F.grid
    V = F.values()
    L, K = V.shape[:2]
    out = np.empty((L, K, len(z_points)), dtype=complex)
    for i in range(L):
        for k in range(K):
            out[i, k] = grid.evaluate(V[i, k], z_points)
    return out * np.exp(-1j * F.tau_grid)[None, :, None]


class FamilyInterpolant:
    """Smooth interpolant ``(t, tau) -> W^{t, tau}(z_p)`` for fixed bases ``z_p``.

    Trigonometric in ``tau`` (of ``e^{-i tau} W``, which is constant for
    phase-equivariant structures) and a cubic spline across the levels.
    """

    def __init__(self, F: Foliation, z_points):
        self.F = F
        self.z = np.atleast_1d(np.asarray(z_points, dtype=complex))
        U = _family_at(F, self.z)            # (L, K, P)
        self.coef, self.m = _trig_coefficients(U, axis=1)
        t = np.asarray(F.t_levels, dtype=float)
        self.spline = CubicSpline(t, self.coef, axis=0) if len(t) > 2 else None
        self.t = t

    def __call__(self, t, tau, p):
        c = self.spline(t)[:, p] if self.spline is not None else self.coef[0][:, p]
        return np.exp(1j * tau) * np.sum(c * np.exp(1j * self.m * tau))


def check_foliation_cover(F: Foliation, region_samples, structure=None, tol=1e-10,
                          max_iter=8):
    """For points ``(z, w)`` find ``(t, tau)`` with ``W^{t, tau}(z) = w``.

    The parameters are first located on :class:`FamilyInterpolant`.  When
    ``structure`` is given they are then polished on genuine discs: each
    iterate ``(t, tau)`` is solved with :func:`attach_disc` (started from
    the nearest lattice disc) and a Broyden update corrects the parameters,
    so ``max_gap`` measures real discs rather than the interpolant.
    ``interpolation_gap`` is the distance between the interpolant's answer
    and the true disc through it.  Points whose level lies outside
    ``[t_start, t_end]`` are reported as outside the covered range.
    """
    z, w = (np.atleast_1d(np.asarray(a, dtype=complex)) for a in region_samples)
    interp = FamilyInterpolant(F, z)
    t_lo, t_hi = F.t_levels[0], F.t_levels[-1]
    gaps, outside, found, interp_gaps = [], [], [], []
    for p in range(len(z)):
        def eq(x, p=p):
            v = interp(np.clip(x[0], t_lo, t_hi), x[1], p) - w[p]
            return np.array([v.real, v.imag])
        x0 = [np.clip(abs(w[p]), t_lo, t_hi), np.angle(w[p])]
        sol = root(eq, x0, method="hybr")
        x = np.array([float(sol.x[0]), float(sol.x[1])])
        gap = float(np.hypot(*eq(x)))
        # below t_start or above t_end the clipped equation is flat in t, so the
        # solver stalls at or past an end of the range without reaching w
        at_end = x[0] <= t_lo + 1e-9 or x[0] >= t_hi - 1e-9
        if at_end and gap > separation_threshold(F.grid):
            outside.append(p)
            continue
        x[0] = np.clip(x[0], t_lo, t_hi)
        if structure is not None:
            x, gap, first = _polish_cover_point(structure, F, interp, z[p], w[p], p, x,
                                                tol, max_iter)
            interp_gaps.append(first)
        gaps.append(gap)
        found.append((float(x[0]), float(np.mod(x[1], 2 * np.pi))))
    max_gap = max(gaps) if gaps else 0.0
    thr = separation_threshold(F.grid)
    return {"n_points": len(z), "n_covered": len(gaps), "outside_range": outside,
            "max_gap": max_gap, "parameters": found, "verified": structure is not None,
            "interpolation_gap": max(interp_gaps) if interp_gaps else None,
            "threshold": thr, "ok": max_gap < thr}


def _disc_at(structure, F: Foliation, t, tau, tol):
    """Disc ``W^{t, tau}`` solved from the nearest lattice member."""
    i = int(np.argmin(np.abs(np.asarray(F.t_levels) - t)))
    k = int(np.argmin(np.abs(np.angle(np.exp(1j * (F.tau_grid - tau))))))
    near = F.discs[i][k]
    guess = GridFunction(near.w.values * (t / near.t) * np.exp(1j * (tau - near.tau)),
                         near.grid)
    return attach_disc(structure, TorusTarget(t), tau, guess, tol=tol,
                       max_iter=F.config.max_iter)


def _polish_cover_point(structure, F, interp, z, w, p, x, tol, max_iter):
    """Broyden iteration in ``(t, tau)`` on true discs; returns ``(x, gap, first gap)``."""
    t_lo, t_hi = F.t_levels[0], F.t_levels[-1]

    def residual(x):
        d = _disc_at(structure, F, float(np.clip(x[0], t_lo, t_hi)), float(x[1]), tol)
        v = F.grid.evaluate(d.w.values, z) - w
        return np.array([v.real, v.imag])

    h = 1e-6
    B = np.empty((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        a = interp(x[0] + e[0], x[1] + e[1], p) - interp(x[0] - e[0], x[1] - e[1], p)
        B[:, j] = [a.real / (2 * h), a.imag / (2 * h)]
    r = residual(x)
    first = float(np.hypot(*r))
    for _ in range(max_iter):
        if np.hypot(*r) < tol:
            break
        dx = -np.linalg.solve(B, r)
        x_new = x + dx
        r_new = residual(x_new)
        B += np.outer(r_new - r - B @ dx, dx) / (dx @ dx)
        x, r = x_new, r_new
    return x, float(np.hypot(*r)), first


def _trig_coefficients(U, axis=0):
    """Fourier coefficients along ``axis`` with the Nyquist term dropped."""
    K = U.shape[axis]
    coef = np.fft.fft(U, axis=axis) / K
    m = np.fft.fftfreq(K, 1.0 / K)
    if K % 2 == 0 and K > 1:
        idx = [slice(None)] * U.ndim
        idx[axis] = K // 2
        coef[tuple(idx)] = 0.0
        m[K // 2] = 0.0
    return coef, m


def torus_cover(F: Foliation, n_points=64, rng=None):
    """Largest gap between sampled torus points and the boundary traces.

    For each level, points ``(e^{i phi}, t e^{i psi})`` are matched to the
    trigonometric interpolant of ``tau -> W^{t, tau}(e^{i phi})``; the gap is
    the smallest ``|W - t e^{i psi}|`` over ``tau``.
    """
    rng = rng or np.random.default_rng(0)
    grid = F.grid
    K = len(F.tau_grid)
    fine = np.linspace(0, 2 * np.pi, 8 * K, endpoint=False)
    worst = 0.0
    for i, t in enumerate(F.t_levels):
        k = rng.integers(0, grid.n_angular, n_points)
        psi = rng.uniform(0, 2 * np.pi, n_points)
        traces = np.array([d.w.values[-1, k] for d in F.discs[i]])      # (K, P)
        coef, m = _trig_coefficients(traces * np.exp(-1j * F.tau_grid)[:, None])
        for p in range(n_points):
            target = t * np.exp(1j * psi[p])

            def gap(s, p=p, target=target):
                return abs(np.exp(1j * s) * np.sum(coef[:, p] * np.exp(1j * m * s)) - target)

            s0 = fine[np.argmin([gap(s) for s in fine])]
            h = np.pi / (4 * K)
            r = minimize_scalar(gap, bounds=(s0 - h, s0 + h), method="bounded",
                                options={"xatol": 1e-12})
            worst = max(worst, float(r.fun))
    return worst


def leviflat_probe(F: Foliation, t, sample_points=None, n_samples=100, tol=None, rng=None):
    """Count the discs of level ``t`` through sampled points of ``Gamma^t``.

    ``sample_points`` is ``(z, w)``; by default points are drawn from the
    level's own discs.  Multiplicity is the number of discs whose graph
    passes within ``tol`` (half the level's separation threshold) of the
    point; anything other than one is an anomaly.
    """
    i = F.level(t)
    grid = F.grid
    row = F.discs[i]
    tol = separation_threshold(grid) / 2 if tol is None else tol
    rng = rng or np.random.default_rng(0)
    if sample_points is None:
        k = rng.integers(0, len(row), n_samples)
        jr = rng.integers(0, grid.n_radial, n_samples)
        ja = rng.integers(0, grid.n_angular, n_samples)
        z = grid.z[jr, ja]
        w = np.array([row[a].w.values[b, c] for a, b, c in zip(k, jr, ja)])
    else:
        z, w = (np.atleast_1d(np.asarray(a, dtype=complex)) for a in sample_points)
    W = np.array([grid.evaluate(d.w.values, z) for d in row])   # (K, P)
    dist = np.abs(W - w[None, :])
    mult = (dist < tol).sum(axis=0)
    anomalies = np.flatnonzero(mult != 1).tolist()
    residuals = [d.residual_norm for d in row]
    return {"n_points": len(z), "multiplicity": mult.tolist(), "anomalies": anomalies,
            "max_disc_residual": float(max(residuals)), "tol": tol, "ok": not anomalies}


def restart_difference(F: Foliation, G: Foliation):
    """Max ``|W_F - W_G|`` over discs at matching ``(t, tau)``."""
    worst = 0.0
    matched = 0
    for i, t in enumerate(F.t_levels):
        j = int(np.argmin(np.abs(np.asarray(G.t_levels) - t)))
        if abs(G.t_levels[j] - t) > 1e-12:
            continue
        for k, tau in enumerate(F.tau_grid):
            d = np.abs(np.angle(np.exp(1j * (G.tau_grid - tau))))
            m = int(np.argmin(d))
            if d[m] > 1e-12:
                continue
            worst = max(worst, float(np.abs(F.discs[i][k].w.values
                                            - G.discs[j][m].w.values).max()))
            matched += 1
    return worst, matched


def restart_probe(structure, F: Foliation, perturb=1e-2, seed=1):
    """Re-solve on ``F``'s levels with doubled phase resolution and perturbed guesses."""
    cfg = F.config
    cfg2 = ContinuationConfig(**{**asdict(cfg), "n_tau": 2 * cfg.n_tau,
                                 "t_levels": list(F.t_levels),
                                 "perturb_init": perturb, "seed": seed})
    G = run_continuation(structure, cfg2, check=False)
    diff, matched = restart_difference(F, G)
    return {"max_difference": diff, "matched_discs": matched}, G


def admissibility_report(F: Foliation, ctx: SymplecticContext | None = None):
    """Per-disc checks, areas, separations, cover and norm monitoring."""
    ctx = ctx or SymplecticContext()
    cfg = F.config
    grid = F.grid
    thr = separation_threshold(grid)
    disc_reports, areas, gaps, ratios = [], [], [], []
    holder = []
    min_mod = np.inf
    for i, row in enumerate(F.discs):
        level_holder = 0.0
        for d in row:
            rep = verify_admissible_disc(d)
            disc_reports.append(rep)
            d.area = area(d, ctx)
            d.boundary_area = boundary_area(d, ctx)
            areas.append(d.area)
            gaps.append(abs(d.area - d.boundary_area))
            ratios.append(d.area / boundary_length(d, ctx))
            min_mod = min(min_mod, d.min_modulus)
            level_holder = max(level_holder, holder_monitor(d.w, cfg.holder_alpha,
                                                            cfg.delta_prime))
        holder.append(level_holder)
    same, cross = graph_separations(F)
    V = F.values()
    tau_jump = float(np.abs(np.roll(V, -1, axis=1) - V).max()) if len(F.tau_grid) > 1 else 0.0
    cover = torus_cover(F)
    areas = np.array(areas)
    report = {
        "n_levels": len(F.t_levels), "n_tau": len(F.tau_grid),
        "t_levels": [float(t) for t in F.t_levels],
        "all_discs_admissible": all(r.ok for r in disc_reports),
        "failed_checks": sorted({f for r in disc_reports for f in r.failures}),
        "max_boundary_deviation": max(r.boundary_deviation for r in disc_reports),
        "windings": sorted({r.winding for r in disc_reports}, key=str),
        "max_normalization_error": max(r.normalization_error for r in disc_reports),
        "max_residual": max(d.residual_norm for d in F.all_discs()),
        "min_modulus": float(min_mod),
        "max_area_error": float(np.abs(areas - np.pi).max()),
        "max_stokes_gap": float(max(gaps)),
        "area_length_ratio_max": float(max(ratios)),
        "separation_same_level": same, "separation_cross_level": cross,
        "separation_threshold": thr,
        "disjoint": bool(min(same, cross) > thr),
        "torus_cover_gap": cover, "cover_ok": bool(cover < thr),
        "holder_by_level": holder, "holder_max": float(max(holder)),
        "tau_continuity": tau_jump * len(F.tau_grid) / (2 * np.pi),
    }
    return report


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def export_foliation(F: Foliation, directory, gamma_stride=4):
    """Write per-level disc files, Gamma^t slices and a manifest.

    Layout: ``level_XXX/tau_YYY.csv`` (disc files), ``gamma/level_XXX.csv``
    (subsampled point clouds) and ``foliation.json``.  Returns the list of
    written paths.
    """
    os.makedirs(directory, exist_ok=True)
    written = []
    for i, row in enumerate(F.discs):
        sub = os.path.join(directory, f"level_{i:03d}")
        os.makedirs(sub, exist_ok=True)
        for k, d in enumerate(row):
            path = os.path.join(sub, f"tau_{k:03d}.csv")
            d.save(path)
            written.append(path)
    gdir = os.path.join(directory, "gamma")
    os.makedirs(gdir, exist_ok=True)
    grid = F.grid
    for i, t in enumerate(F.t_levels):
        z, w = F.gamma_surface(t)
        zs = z[:, ::gamma_stride, ::gamma_stride]
        ws = w[:, ::gamma_stride, ::gamma_stride]
        taus = np.broadcast_to(F.tau_grid[:, None, None], zs.shape)
        rec = np.column_stack([taus.ravel(), zs.real.ravel(), zs.imag.ravel(),
                               ws.real.ravel(), ws.imag.ravel()])
        path = os.path.join(gdir, f"level_{i:03d}.csv")
        np.savetxt(path, rec, delimiter=",", header="tau,z_re,z_im,w_re,w_im",
                   comments="", fmt="%.12g")
        written.append(path)
    manifest = {"t_levels": [float(t) for t in F.t_levels],
                "tau_grid": [float(x) for x in F.tau_grid],
                "grid": [grid.n_radial, grid.n_angular], "complete": F.complete,
                "admissibility_report": _plain(F.admissibility_report),
                "files": {os.path.relpath(p, directory): _sha256(p) for p in written}}
    mpath = os.path.join(directory, "foliation.json")
    with open(mpath, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    written.append(mpath)
    return written


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj
