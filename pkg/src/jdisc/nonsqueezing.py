"""Holomorphic radius estimates and squeezing experiments.

The holomorphic radius of a domain ``G`` containing the origin is the
infimum of ``sqrt(E(X) / pi)`` over closed one-dimensional analytic sets
``X`` of ``G`` through ``0``.  Here that infimum is taken over images of
polynomial discs, so every number produced is an *upper estimate*; the
Lelong bound (area at least ``pi r^2`` inside ``r B``) is checked as a
theorem-backed lower bound.

The squeeze pipeline transports ``J_st`` by a Hamiltonian map, blends it
back to ``J_st``, finds the disc through the image of the origin in the
cylinder model and measures the areas on both sides of the map.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .attach import TorusTarget, attach_disc
from .continuation import trace_disc
from .errors import AttachFailure, ContinuationBreakdown, SetupError, TamingError
from .grid import DiscGrid, GridFunction
from .structures import (J_ST, AlmostComplexStructure, matrix_from_structure,
                         operator_norm, smoothstep5, to_real)
from .symplectic import SymplecticContext, area, boundary_area

GL_ORDER = 6


# ---------------------------------------------------------------------------
# candidates and domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalyticDiscCandidate:
    """Polynomial disc ``g(zeta) = (sum a_k zeta^k, sum b_k zeta^k)`` on ``D_rho``.

    ``a[0]`` and ``b[0]`` are the coefficients of ``zeta``; there is no
    constant term, so ``g(0) = 0`` exactly.
    """

    a: tuple
    b: tuple
    rho: float = 1.0

    def __post_init__(self):
        a = tuple(complex(x) for x in self.a)
        b = tuple(complex(x) for x in self.b)
        d = max(len(a), len(b), 1)
        a, b = a + (0j,) * (d - len(a)), b + (0j,) * (d - len(b))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if not any(a + b):
            raise ValueError("candidate is constant")
        if not self.rho > 0:
            raise ValueError("parameter radius must be positive")

    @classmethod
    def line(cls, direction=(1.0, 0.0), rho=1.0):
        """The complex line through ``0`` spanned by ``direction`` (unit speed)."""
        v = np.asarray(direction, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls((v[0],), (v[1],), rho)

    @property
    def degree(self):
        return len(self.a)

    def _poly(self, coef, zeta):
        out = np.zeros_like(zeta)
        for c in reversed(coef):
            out = (out + c) * zeta
        return out

    def _dpoly(self, coef, zeta):
        out = np.zeros_like(zeta)
        for k in range(len(coef), 0, -1):
            out = out * zeta + k * coef[k - 1]
        return out

    def __call__(self, zeta):
        zeta = np.asarray(zeta, dtype=complex)
        return self._poly(self.a, zeta), self._poly(self.b, zeta)

    def derivative(self, zeta):
        zeta = np.asarray(zeta, dtype=complex)
        return self._dpoly(self.a, zeta), self._dpoly(self.b, zeta)

    def points(self, zeta):
        """Real points ``(..., 4)`` of the image."""
        return to_real(*self(zeta))

    def with_radius(self, rho):
        return replace(self, rho=float(rho))

    def coefficients(self):
        """Real parameter vector (real and imaginary parts of all coefficients)."""
        c = np.array(self.a + self.b)
        return np.concatenate([c.real, c.imag])

    @classmethod
    def from_coefficients(cls, x, degree, rho=1.0):
        n = 2 * degree
        c = x[:n] + 1j * x[n:]
        return cls(tuple(c[:degree]), tuple(c[degree:]), rho)

    def is_injective(self, n=48, rel=0.05):
        """Sampled injectivity: no two far-apart parameters share an image point.

        Nodes more than ``0.25 rho`` apart whose images lie closer than
        ``rel`` times the image's node spacing flag a double point.
        """
        r = self.rho * (np.arange(1, n + 1) / n)
        th = 2 * np.pi * np.arange(4 * n) / (4 * n)
        zeta = (r[:, None] * np.exp(1j * th)[None, :]).ravel()
        zeta = np.concatenate([[0j], zeta])
        P = self.points(zeta)
        h = self.rho / n
        lip = float(np.max(np.sqrt(sum(np.abs(d) ** 2 for d in self.derivative(zeta)))))
        pairs = cKDTree(P).query_pairs(rel * lip * h, output_type="ndarray")
        if len(pairs) == 0:
            return True
        far = np.abs(zeta[pairs[:, 0]] - zeta[pairs[:, 1]]) > 0.25 * self.rho
        return not bool(far.any())


@dataclass(frozen=True)
class DomainSpec:
    """Domain ``G = {gauge < 1}`` in ``C^2`` (real coordinates ``x1, y1, x2, y2``).

    ``gauge`` is a continuous function, homogeneous of degree one for the
    star-shaped presets (so ``s G = {gauge < s}``).  ``radius`` bounds
    ``|X|`` on ``G`` (``inf`` for unbounded domains).
    """

    name: str
    gauge: Callable
    radius: float
    star_shaped: bool = True

    def contains(self, X):
        return self.gauge(np.asarray(X, dtype=float)) < 1

    def defining(self, X):
        return self.gauge(X) - 1.0

    @property
    def bounding_box(self):
        r = self.radius
        return (-r,) * 4, (r,) * 4

    def scaled(self, s):
        """The copy ``s G`` (star-shaped domains only)."""
        if not self.star_shaped:
            raise ValueError("scaling needs a star-shaped domain")
        g = self.gauge
        return DomainSpec(f"{s:g}*{self.name}", lambda X: g(X) / s, self.radius * s)

    def sample(self, n, rng, boundary_fraction=0.25):
        """Points of ``G``: uniform in volume, plus some on ``bG`` (star-shaped)."""
        d = rng.normal(size=(n, 4))
        d /= self.gauge(d)[:, None]
        u = rng.uniform(0, 1, n) ** 0.25
        u[: int(boundary_fraction * n)] = 1.0 - 1e-12
        return d * u[:, None]


def ball(r=1.0):
    return DomainSpec(f"ball({r:g})", lambda X: np.linalg.norm(X, axis=-1) / r, float(r))


def cylinder(R=1.0):
    return DomainSpec(f"cylinder({R:g})", lambda X: np.hypot(X[..., 0], X[..., 1]) / R,
                      np.inf)


def bidisc():
    return DomainSpec("bidisc", lambda X: np.maximum(np.hypot(X[..., 0], X[..., 1]),
                                                     np.hypot(X[..., 2], X[..., 3])),
                      np.sqrt(2.0))


def real_bidisc():
    """``{x1^2 + x2^2 < 1, y1^2 + y2^2 < 1}``."""
    return DomainSpec("real_bidisc", lambda X: np.sqrt(np.maximum(
        X[..., 0] ** 2 + X[..., 2] ** 2, X[..., 1] ** 2 + X[..., 3] ** 2)), np.sqrt(2.0))


PRESETS = {"ball": ball, "cylinder": cylinder, "bidisc": bidisc, "real_bidisc": real_bidisc}


# ---------------------------------------------------------------------------
# clipped areas
# ---------------------------------------------------------------------------

def escape_radius(c: AnalyticDiscCandidate, G: DomainSpec, n_theta=256, margin=1e-9,
                  max_radius=1e3):
    """Smallest sampled ``rho`` with ``g(rho bD)`` outside the closure of ``G``.

    Scans ``rho`` geometrically and refines by bisection; the image of
    ``D_rho`` meets ``G`` in a closed subset of ``G`` once the boundary
    circle has left ``G``.  Returns ``inf`` when no such radius exists
    below ``max_radius``.
    """
    e = np.exp(2j * np.pi * (np.arange(n_theta) + 0.5) / n_theta)

    def outside(rho):
        return bool(G.gauge(c.points(rho * e)).min() > 1 + margin)

    lo, hi = 0.0, 0.05
    while not outside(hi):
        lo, hi = hi, hi * 1.25
        if hi > max_radius:
            return np.inf
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if outside(mid):
            hi = mid
        else:
            lo = mid
    return hi


def fit_candidate(c: AnalyticDiscCandidate, G: DomainSpec):
    """``c`` with its parameter radius set to the escape radius for ``G``."""
    rho = escape_radius(c, G)
    return None if not np.isfinite(rho) else c.with_radius(rho)


def clipped_area(c: AnalyticDiscCandidate, G: DomainSpec, n_theta=256, n_r=64,
                 n_gl=GL_ORDER, bisection_steps=52):
    """Euclidean area of ``g(D_rho) ∩ G`` by pullback quadrature.

    Along each ray of the parameter disc the membership changes are found
    by bisection inside the sampling cells; on every inside piece the
    density ``(|g_1'|^2 + |g_2'|^2) r`` is integrated by Gauss-Legendre,
    and the rays are combined by the trapezoidal rule in angle.
    Multiplicity is one per parameter point.
    """
    rho = c.rho
    th = 2 * np.pi * (np.arange(n_theta) + 0.5) / n_theta
    e = np.exp(1j * th)
    s = rho * np.linspace(0.0, 1.0, n_r + 1)
    inside = G.defining(c.points(s[None, :] * e[:, None])) < 0
    lo = np.broadcast_to(s[:-1], (n_theta, n_r)).copy()
    hi = np.broadcast_to(s[1:], (n_theta, n_r)).copy()
    flip = inside[:, 1:] != inside[:, :-1]
    ri, ci = np.nonzero(flip)
    if len(ri):
        a, b = lo[ri, ci], hi[ri, ci]
        start_in = inside[ri, ci]
        for _ in range(bisection_steps):
            m = 0.5 * (a + b)
            m_in = G.defining(c.points(m * e[ri])) < 0
            same = m_in == start_in
            a = np.where(same, m, a)
            b = np.where(same, b, m)
        cross = 0.5 * (a + b)
        # keep the inside part of each flipped cell
        lo[ri, ci] = np.where(start_in, lo[ri, ci], cross)
        hi[ri, ci] = np.where(start_in, cross, hi[ri, ci])
    keep = inside[:, :-1] | flip
    x, w = np.polynomial.legendre.leggauss(n_gl)
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    r = mid[..., None] + half[..., None] * x                 # (n_theta, n_r, n_gl)
    d1, d2 = c.derivative(r * e[:, None, None])
    dens = (np.abs(d1) ** 2 + np.abs(d2) ** 2) * r
    cell = half * np.tensordot(dens, w, axes=([-1], [0]))
    return float(np.sum(np.where(keep, cell, 0.0)) * 2 * np.pi / n_theta)


def monte_carlo_area(c: AnalyticDiscCandidate, G: DomainSpec, n=10**6, rng=None):
    """Monte-Carlo estimate of :func:`clipped_area` with its standard error."""
    rng = rng or np.random.default_rng(0)
    zeta = c.rho * np.sqrt(rng.uniform(size=n)) * np.exp(2j * np.pi * rng.uniform(size=n))
    d1, d2 = c.derivative(zeta)
    f = (np.abs(d1) ** 2 + np.abs(d2) ** 2) * G.contains(c.points(zeta))
    scale = np.pi * c.rho**2
    return float(f.mean() * scale), float(f.std() * scale / np.sqrt(n))


# ---------------------------------------------------------------------------
# Lelong bound and holomorphic radius
# ---------------------------------------------------------------------------

def lelong_check(c: AnalyticDiscCandidate, r, tol=1e-4):
    """Compare ``E(g(D) ∩ r B)`` with ``pi r^2``.

    The candidate's parameter radius is set to its escape radius for
    ``r B`` so that the clipped image is a closed analytic subset.  A
    deficit beyond ``tol`` (relative) can only be quadrature error and is
    flagged as such.
    """
    G = ball(r)
    fitted = fit_candidate(c, G)
    if fitted is None:
        raise ValueError("candidate does not leave r B below the largest parameter radius")
    E = clipped_area(fitted, G)
    bound = np.pi * r * r
    margin = E / bound - 1.0
    return {"area": E, "bound": bound, "margin": margin, "rho": fitted.rho,
            "ok": bool(margin >= -tol), "accuracy_failure": bool(margin < -tol)}


def random_candidate(rng, max_degree=4, decay=0.6):
    """Random polynomial disc through ``0`` of degree at most ``max_degree``."""
    deg = int(rng.integers(1, max_degree + 1))
    scale = decay ** np.arange(deg)
    a = (rng.normal(size=deg) + 1j * rng.normal(size=deg)) * scale
    b = (rng.normal(size=deg) + 1j * rng.normal(size=deg)) * scale
    return AnalyticDiscCandidate(tuple(a), tuple(b))


def default_family(rng, max_degree=4):
    """Coordinate and diagonal lines first, then random polynomial discs."""
    for v in ((1, 0), (0, 1), (1, 1), (1, 1j)):
        yield AnalyticDiscCandidate.line(v)
    while True:
        yield random_candidate(rng, max_degree)


@dataclass
class RhEstimate:
    """Upper estimate of the holomorphic radius over a candidate family."""

    value: float
    candidate: AnalyticDiscCandidate | None
    n_candidates: int
    evaluations: int
    budget_exhausted: bool
    sampled_best: float
    label: str = "upper estimate"

    def __float__(self):
        return float(self.value)

    def margin(self, reference=1.0):
        return self.value - reference


def candidate_radius(c, G):
    """``sqrt(E / pi)`` of the fitted candidate (``inf`` if it never leaves ``G``)."""
    fitted = fit_candidate(c, G)
    if fitted is None:
        return np.inf, None
    return float(np.sqrt(clipped_area(fitted, G) / np.pi)), fitted


def rh_upper_estimate(G: DomainSpec, family=None, budget=1000, *, n_candidates=None,
                      refine_budget=200, rng=None, max_degree=4):
    """Best ``sqrt(E / pi)`` over sampled candidates, then coordinate descent.

    ``family`` is an iterator of candidates (default :func:`default_family`).
    ``budget`` caps the total number of area evaluations; ``n_candidates``
    (default ``budget - refine_budget``) of them go to sampling.  The
    refinement perturbs one real coefficient at a time with halving steps.
    """
    if not G.contains(np.zeros(4)):
        raise ValueError("the domain must contain the origin")
    rng = rng or np.random.default_rng(0)
    family = iter(family if family is not None else default_family(rng, max_degree))
    n_candidates = budget - refine_budget if n_candidates is None else n_candidates
    best, best_c = np.inf, None
    used = 0
    for _ in range(n_candidates):
        try:
            c = next(family)
        except StopIteration:
            break
        val, fitted = candidate_radius(c, G)
        used += 1
        if val < best:
            best, best_c = val, fitted
    sampled_best = best
    exhausted = False
    if best_c is not None and refine_budget > 0:
        x = best_c.coefficients()
        deg = best_c.degree
        step = 0.05
        while step > 1e-4:
            improved = False
            for i in range(len(x)):
                for sgn in (1, -1):
                    if used >= budget:
                        exhausted = True
                        break
                    y = x.copy()
                    y[i] += sgn * step
                    if not np.any(y):
                        continue
                    val, fitted = candidate_radius(
                        AnalyticDiscCandidate.from_coefficients(y, deg), G)
                    used += 1
                    if val < best - 1e-12:
                        best, best_c, x, improved = val, fitted, y, True
                        break
                if exhausted:
                    break
            if exhausted:
                break
            if not improved:
                step /= 2
    return RhEstimate(best, best_c, n_candidates, used, exhausted, sampled_best)


def lelong_batch(n, radii=(0.5, 1.0), rng=None, tol=1e-4, max_degree=4):
    """Run :func:`lelong_check` on ``n`` random candidates for every radius."""
    rng = rng or np.random.default_rng(0)
    worst, violations = np.inf, 0
    for _ in range(n):
        c = random_candidate(rng, max_degree)
        for r in radii:
            rep = lelong_check(c, r, tol)
            worst = min(worst, rep["margin"])
            violations += not rep["ok"]
    return {"n_candidates": n, "radii": list(radii), "min_margin": float(worst),
            "violations": violations, "ok": violations == 0}


# ---------------------------------------------------------------------------
# real bidisc probe
# ---------------------------------------------------------------------------

def _xy_norms(X):
    return X[..., 0] ** 2 + X[..., 2] ** 2, X[..., 1] ** 2 + X[..., 3] ** 2


def distance_to_circles(X):
    """Distance to ``S1 ∪ S2`` (the unit circles of the real and imaginary planes)."""
    nx, ny = (np.sqrt(v) for v in _xy_norms(X))
    d1 = np.sqrt((nx - 1) ** 2 + ny**2)
    d2 = np.sqrt((ny - 1) ** 2 + nx**2)
    return np.minimum(d1, d2)


def sphere_contact_points(n, rng, steps=200, rate=0.5):
    """Points of ``bB ∩ b(real bidisc)`` by projected ascent on the sphere.

    On ``bB`` the real-bidisc gauge is at most one; starting from random
    sphere points, the larger of the two plane norms is pushed up and the
    point re-normalized until the gauge reaches one.
    """
    X = rng.normal(size=(n, 4))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    for _ in range(steps):
        nx, ny = _xy_norms(X)
        gx = np.where(nx >= ny, 1.0 + rate, 1.0)
        gy = np.where(nx >= ny, 1.0, 1.0 + rate)
        X = X * np.stack([gx, gy, gx, gy], axis=1)
        X /= np.linalg.norm(X, axis=1, keepdims=True)
    return X


def real_bidisc_probe(n_samples=20000, candidates=None, rng=None, concentration_radius=0.25):
    """Sampled checks of the real-bidisc geometry.

    (a) ``B`` lies in the real bidisc; (b) contact points of the two
    boundaries lie on ``S1 ∪ S2``; (c) the curve ``(z1^2 + z2^2)^2 = 1``
    stays away from the origin; (d) for candidates through ``0`` the area
    outside ``B`` is positive, with the fraction of each candidate's
    sphere crossing lying near ``S1 ∪ S2`` reported alongside.
    """
    rng = rng or np.random.default_rng(0)
    RB = real_bidisc()
    B = ball(1.0)
    inner = B.sample(n_samples, rng)
    a_fail = int(np.count_nonzero(~(RB.gauge(inner) <= 1 + 1e-15)))
    contact = sphere_contact_points(max(n_samples // 20, 100), rng)
    contact_gap = float(np.abs(RB.gauge(contact) - 1).max())
    b_dist = float(distance_to_circles(contact).max())
    z1 = rng.normal(size=n_samples) + 1j * rng.normal(size=n_samples)
    branch = rng.choice([1.0, -1.0], n_samples)
    z2 = np.sqrt(branch - z1**2 + 0j)
    curve_min = float(np.sqrt(np.abs(z1) ** 2 + np.abs(z2) ** 2).min())
    if candidates is None:
        cand_rng = np.random.default_rng(1)
        candidates = [AnalyticDiscCandidate.line(v) for v in ((1, 0), (1, 1), (1, 1j))]
        candidates += [random_candidate(cand_rng) for _ in range(20)]
    rows = []
    for c in candidates:
        fitted = fit_candidate(c, RB)
        if fitted is None:
            continue
        E = clipped_area(fitted, RB)
        EB = clipped_area(fitted, B)
        # where the candidate crosses the sphere
        th = 2 * np.pi * np.arange(256) / 256
        rr = np.linspace(0, fitted.rho, 400)
        P = fitted.points(rr[None, :] * np.exp(1j * th)[:, None])
        g = np.linalg.norm(P, axis=-1)
        k = np.argmax(g >= 1, axis=1)
        hit = g[np.arange(len(th)), k] >= 1
        crossing = P[np.arange(len(th)), k][hit]
        frac = float(np.mean(distance_to_circles(crossing) < concentration_radius)) if len(crossing) else 0.0
        rows.append({"coefficients": [list(map(complex, fitted.a)), list(map(complex, fitted.b))],
                     "area": E, "area_in_ball": EB, "excess": E - EB,
                     "near_circle_fraction": frac})
    excess = [r["excess"] for r in rows]
    return {
        "ball_inside_real_bidisc": {"samples": n_samples, "failures": a_fail},
        "contact_points": {"samples": len(contact), "max_gauge_gap": contact_gap,
                           "max_distance_to_circles": b_dist, "ok": b_dist < 1e-8},
        "curve_misses_origin": {"value_at_origin": 0.0, "equals_one": False,
                                "min_norm_on_curve": curve_min, "ok": curve_min > 0},
        "candidates": rows,
        "min_excess": float(min(excess)) if excess else None,
        "ok": a_fail == 0 and b_dist < 1e-8 and curve_min > 0 and all(x > 0 for x in excess),
    }


# ---------------------------------------------------------------------------
# squeeze experiment
# ---------------------------------------------------------------------------

def _inverse_with_jacobian(phi, X):
    if hasattr(phi, "inverse_with_jacobian"):
        return phi.inverse_with_jacobian(X)
    return phi.inverse(X), np.broadcast_to(np.eye(4), X.shape + (4,)).copy()


def max_displacement(phi, radius, n=4000, rng=None):
    """Sampled ``max |phi^{-1}(X) - X|`` over the ball of the given radius."""
    if radius <= 0:
        return 0.0
    rng = rng or np.random.default_rng(0)
    X = ball(radius).sample(n, rng)
    return float(np.linalg.norm(phi.inverse(X) - X, axis=1).max())


def transported_structure(phi, G: DomainSpec, s_inner, s_outer, *, R=1.0, shift=0.0,
                          reach=np.inf, name="transported"):
    """``phi_* J_st`` on ``phi(s_inner G)``, ``J_st`` off ``phi(s_outer G)``.

    Coordinates are those of the disc model: the point ``(z, w)`` stands for
    ``R (z, w - shift)``.  The blend factor is the quintic smoothstep of the
    gauge of the preimage, so one inverse-map evaluation per point gives
    both the factor and the differential.  Points farther than ``reach``
    from the origin (in original coordinates) are known to lie outside
    ``phi(s_outer G)`` and are skipped.
    """
    def field(z, w):
        X = to_real(R * np.asarray(z), R * (np.asarray(w) - shift))
        out = np.zeros(X.shape[:-1] + (2, 2), dtype=complex)
        near = np.linalg.norm(X, axis=-1) < reach
        if not near.any():
            return out
        Y, Minv = _inverse_with_jacobian(phi, X[near])
        chi = smoothstep5((s_outer - G.gauge(Y)) / (s_outer - s_inner))
        on = chi > 0
        if not on.any():
            return out
        Mi = Minv[on]
        Jp = np.linalg.solve(Mi, J_ST @ Mi)        # M J_st M^{-1} with M = Mi^{-1}
        A = np.zeros(Y.shape[:-1] + (2, 2), dtype=complex)
        A[on] = chi[on][:, None, None] * matrix_from_structure(Jp)
        out[near] = A
        return out
    return AlmostComplexStructure(field, None, name)


def clipped_integral(grid: DiscGrid, density, level):
    """``∫ density`` over ``{level < 0}`` by per-ray trapezoids with linear cuts."""
    r = grid.radial_nodes
    F = density * r[:, None]
    inside = level < 0
    # innermost piece [0, r0]: the integrand vanishes at the origin
    total = np.where(inside[0], 0.5 * F[0] * r[0], 0.0)
    f0, f1 = F[:-1], F[1:]
    l0, l1 = level[:-1], level[1:]
    i0, i1 = inside[:-1], inside[1:]
    dr = np.diff(r)[:, None]
    full = i0 & i1
    part = i0 ^ i1
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(part, l0 / (l0 - l1), 0.0)     # crossing fraction of the cell
    fc = f0 + lam * (f1 - f0)
    piece = np.where(full, 0.5 * (f0 + f1) * dr, 0.0)
    piece += np.where(part & i0, 0.5 * (f0 + fc) * lam * dr, 0.0)
    piece += np.where(part & i1, 0.5 * (fc + f1) * (1 - lam) * dr, 0.0)
    total = total + piece.sum(axis=0)
    return float(total.sum() * 2 * np.pi / grid.n_angular)


@dataclass
class SqueezeExperiment:
    """Setup of one squeeze run.

    ``G1`` is squeezed by ``phi`` into the cylinder ``R D x C``; the
    exhaustion uses ``K_n = (1 - 1/n) G1`` for every ``n`` in
    ``exhaustion``.  ``shift`` translates ``w`` (in units of ``R``) so that
    the transported structure lives away from ``w = 0`` in the disc model.
    """

    phi: object
    G1: DomainSpec
    R: float = 1.0
    exhaustion: tuple = (3,)
    shift: float = 2.0
    resolution: tuple = (64, 256)
    tol: float = 1e-10
    area_tol: float = 1e-3
    t_start: float = 0.1
    step: float = 0.25
    n_check: int = 4000
    seed: int = 0
    results: dict = field(default_factory=dict)

    def validate(self):
        """Check ``phi(G1)`` stays in the cylinder (sampled); record ``phi(0)``."""
        rng = np.random.default_rng(self.seed)
        if not self.G1.contains(np.zeros(4)):
            raise SetupError("G1 must contain the origin")
        if not np.isfinite(self.G1.radius):
            raise SetupError("G1 must be bounded")
        X = self.G1.sample(self.n_check, rng)
        Y = self.phi.forward(X)
        zmax = float(np.hypot(Y[:, 0], Y[:, 1]).max())
        p = self.phi.forward(np.zeros(4))
        self.results["phi0"] = p.tolist()
        self.results["image_max_abs_z"] = zmax
        if not zmax < self.R:
            raise SetupError(f"phi(G1) leaves the cylinder (max |z| = {zmax:.4f} >= R)")
        return p


def _solve_through_point(structure, p_z, p_w, grid, t_start, step, tol, max_newton=30):
    """Disc of the family through ``(p_z, p_w)``: march one phase, then Broyden in ``(t, tau)``."""
    t, tau = abs(p_w), float(np.angle(p_w))
    disc = trace_disc(structure, tau, min(t_start, t), t, grid=grid, step=step, tol=tol)

    def miss(d):
        return complex(grid.evaluate(d.w.values, p_z)) - p_w

    F = miss(disc)
    e = np.exp(1j * tau)
    Jac = np.array([[e.real, -t * e.imag], [e.imag, t * e.real]])
    history = [abs(F)]
    for _ in range(max_newton):
        if abs(F) < tol:
            break
        dx = -np.linalg.solve(Jac, [F.real, F.imag])
        t_new, tau_new = t + dx[0], tau + dx[1]
        guess = GridFunction(disc.w.values * (t_new / t) * np.exp(1j * (tau_new - tau)), grid)
        disc = attach_disc(structure, TorusTarget(t_new), tau_new, guess, tol=tol)
        F_new = miss(disc)
        dF = np.array([(F_new - F).real, (F_new - F).imag])
        Jac = Jac + np.outer(dF - Jac @ dx, dx) / (dx @ dx)
        t, tau, F = t_new, tau_new, F_new
        history.append(abs(F))
    return disc, history


def _stage_n(e: SqueezeExperiment, n, p, grid, reach_pad, ctx):
    s_n, s_next = 1.0 - 1.0 / n, 1.0 - 1.0 / (n + 1)
    R, c = e.R, e.shift
    reach = s_next * e.G1.radius + reach_pad
    J = transported_structure(e.phi, e.G1, s_n, s_next, R=R, shift=c, reach=reach,
                              name=f"transported(n={n})")
    # taming of the blended structure on phi(K_{n+1}) (sampled)
    rng = np.random.default_rng(e.seed + n)
    Xs = e.phi.forward(e.G1.scaled(s_next).sample(e.n_check, rng))
    zs, ws = Xs[:, 0] + 1j * Xs[:, 1], Xs[:, 2] + 1j * Xs[:, 3]
    norm = float(operator_norm(J.matrix(zs / R, ws / R + c)).max())
    if not norm < 1:
        raise TamingError(f"blended structure not tamed (max |A| = {norm:.4f})")
    pz, pw = (p[0] + 1j * p[1]) / R, (p[2] + 1j * p[3]) / R + c
    disc, newton = _solve_through_point(J, pz, pw, grid, e.t_start, e.step, e.tol)
    W = disc.w.values
    Wz, Wzb = grid.d_z(W), grid.d_zbar(W)
    # nodes in original coordinates and their preimages
    X = to_real(R * grid.z, R * (W - c)).reshape(-1, 4)
    Y = X.copy()
    Minv = np.broadcast_to(np.eye(4), X.shape + (4,)).copy()
    near = np.linalg.norm(X, axis=1) < s_n * e.G1.radius + reach_pad
    if near.any():
        Y[near], Minv[near] = _inverse_with_jacobian(e.phi, X[near])
    level = (e.G1.gauge(Y) - s_n).reshape(grid.shape)
    omega_density = R * R * (1 + np.abs(Wz) ** 2 - np.abs(Wzb) ** 2)
    Wx, Wy = Wz + Wzb, 1j * (Wz - Wzb)
    ones = np.ones(grid.shape)
    Tx = R * to_real(ones, Wx).reshape(-1, 4)
    Ty = R * to_real(1j * ones, Wy).reshape(-1, 4)
    Tx = np.einsum("nij,nj->ni", Minv, Tx)
    Ty = np.einsum("nij,nj->ni", Minv, Ty)
    gram = (np.einsum("ni,ni->n", Tx, Tx) * np.einsum("ni,ni->n", Ty, Ty)
            - np.einsum("ni,ni->n", Tx, Ty) ** 2)
    euclid_density = np.sqrt(np.maximum(gram, 0)).reshape(grid.shape)
    E_image = clipped_integral(grid, omega_density, level)
    E_pull = clipped_integral(grid, euclid_density, level)
    E_D = R * R * area(disc, ctx)
    E_Db = R * R * boundary_area(disc, ctx)
    full = np.pi * R * R
    origin_miss = float(np.linalg.norm(e.phi.inverse(np.asarray(p, float)[None])[0]))
    return {
        "n": n, "K_scale": s_n, "blend_scale": s_next, "max_structure_norm": norm,
        "t": disc.t, "tau": disc.tau, "disc_residual": disc.residual_norm,
        "through_p_error": newton[-1] * R, "newton_history": newton,
        "disc_area": E_D, "disc_boundary_area": E_Db, "stokes_gap": abs(E_D - E_Db),
        "area_phiK_cap_D": E_image, "area_X_n": E_pull,
        "transport_gap": abs(E_image - E_pull),
        "preimage_of_p_norm": origin_miss,
        "certificate": bool(E_pull <= full + e.area_tol and abs(E_D - full) <= e.area_tol),
        "rh_bound_K_n": float(np.sqrt(E_pull / np.pi)),
        "disc": disc,
    }


def run_squeeze_experiment(e: SqueezeExperiment, ctx: SymplecticContext | None = None):
    """Run the four stages for every exhaustion index; return the report.

    On continuation breakdown the report is marked incomplete and carries no
    certificate.  A map pushing ``G1`` out of the cylinder raises
    :class:`SetupError`.
    """
    ctx = ctx or SymplecticContext()
    p = e.validate()
    grid = DiscGrid(*e.resolution)
    pad = 1.5 * max_displacement(e.phi, getattr(e.phi, "support_radius", 0.0) or 0.0,
                                 rng=np.random.default_rng(e.seed)) + 0.05
    stages, status = [], "complete"
    for n in e.exhaustion:
        try:
            stages.append(_stage_n(e, n, p, grid, pad, ctx))
        except (ContinuationBreakdown, AttachFailure) as exc:
            status = "incomplete"
            stages.append({"n": n, "error": str(exc)})
            break
    done = [s for s in stages if "error" not in s]
    areas = [s["area_X_n"] for s in done]
    report = {
        "status": status, "R": e.R, "G1": e.G1.name, "phi0": e.results["phi0"],
        "image_max_abs_z": e.results["image_max_abs_z"], "shift": e.shift,
        "resolution": list(e.resolution), "area_tol": e.area_tol,
        "stages": stages,
        "monotone_areas": bool(all(a <= b + e.area_tol for a, b in zip(areas, areas[1:]))),
        "certificate": bool(status == "complete" and done and all(s["certificate"] for s in done)),
    }
    if report["certificate"]:
        report["rh_bound"] = {"statement": "rh(G1) <= R", "R": e.R,
                              "max_area_X_n": max(areas), "bound": np.pi * e.R**2 + e.area_tol}
    e.results.update(report)
    return report
