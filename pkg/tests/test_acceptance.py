"""Acceptance criteria, each at its stated tolerance.

Every test records one ``criterion N: PASS/FAIL`` line; the lines are
repeated in the terminal summary.
"""

import time

import numpy as np
import pytest

from conftest import record
from jdisc.beltrami import BeltramiProblem, RiemannHilbert, solve_beltrami
from jdisc.continuation import (ContinuationConfig, check_foliation_cover,
                                graph_separations, restart_probe, run_continuation,
                                separation_threshold, torus_cover)
from jdisc.grid import DiscGrid, GridFunction
from jdisc.nonsqueezing import (AnalyticDiscCandidate, SqueezeExperiment, ball, bidisc,
                                clipped_area, fit_candidate, lelong_batch, real_bidisc,
                                rh_upper_estimate, run_squeeze_experiment)
from jdisc.structures import (OMEGA, complex_hessian_form, flat_triangular, levi_form,
                              operator_norm, structure_from_matrix, taming_form)
from jdisc.symplectic import (HamiltonianMap, SymplecticContext, area, boundary_area,
                              radial_bump_hamiltonian, shear_hamiltonian)


def test_criterion_1_flat_foliation_exact():
    start = time.perf_counter()
    F = run_continuation(flat_triangular(), ContinuationConfig())
    elapsed = time.perf_counter() - start
    z = F.grid.z
    w_err, a_err = 0.0, 0.0
    for i, t in enumerate(F.t_levels):
        for k, tau in enumerate(F.tau_grid):
            s = F.discs[i][k]
            w_err = max(w_err, float(np.abs(s.values - t * np.exp(1j * tau)).max()))
            a_err = max(a_err, abs(area(s) - np.pi))
    ok = (F.complete and F.t_levels[0] == pytest.approx(0.1) and F.t_levels[-1] == 1.0
          and len(F.tau_grid) == 16 and z.shape == (64, 256)
          and w_err < 1e-8 and a_err < 1e-8 and elapsed < 60)
    record(1, ok, f"max|w - t e^(i tau)| = {w_err:.1e}, max|E - pi| = {a_err:.1e}, "
                  f"{len(F.t_levels)} levels in {elapsed:.1f}s")
    assert ok


def test_criterion_2_bump_area_theorem(bump_structure, bump_foliation):
    F = bump_foliation
    rng = np.random.default_rng(2)
    zs = np.sqrt(rng.uniform(0, 0.25, 20000)) * np.exp(2j * np.pi * rng.uniform(size=20000))
    ws = np.sqrt(rng.uniform(1 / 16, 9 / 16, 20000)) * np.exp(2j * np.pi * rng.uniform(size=20000))
    sup = float(operator_norm(bump_structure.matrix(zs, ws)).max())
    worst_int = worst_bdy = worst_gap = 0.0
    for s in F.all_discs():
        a, b = area(s), boundary_area(s)
        worst_int = max(worst_int, abs(a - np.pi))
        worst_bdy = max(worst_bdy, abs(b - np.pi))
        worst_gap = max(worst_gap, abs(a - b))
    ok = (F.complete and F.t_levels[-1] == 1.0 and sup <= 0.3 + 1e-12 and worst_int < 1e-3
          and worst_bdy < 1e-3 and worst_gap < 1e-3)
    record(2, ok, f"{len(F.all_discs())} discs, sup||A|| sampled {sup:.3f}, "
                  f"|E - pi| <= {worst_int:.1e}, |E_bdy - pi| <= {worst_bdy:.1e}, "
                  f"|E - E_bdy| <= {worst_gap:.1e}")
    assert ok


def _beltrami_cases():
    """Five ``(w*, w*_z, w*_zbar, q0)`` with closed-form derivatives."""
    cz = np.conj
    return [
        (lambda z: cz(z) ** 2 + np.exp(z), lambda z: np.exp(z), lambda z: 2 * cz(z), 0.0),
        (lambda z: np.exp(z * cz(z)), lambda z: cz(z) * np.exp(z * cz(z)),
         lambda z: z * np.exp(z * cz(z)), 0.0),
        (lambda z: np.sin(cz(z)) + z**3, lambda z: 3 * z**2, lambda z: np.cos(cz(z)), 0.3),
        (lambda z: z * np.exp(z * cz(z)), lambda z: (1 + z * cz(z)) * np.exp(z * cz(z)),
         lambda z: z * z * np.exp(z * cz(z)), 0.3),
        (lambda z: 1 / (2 - cz(z)) + z * np.abs(z) ** 2, lambda z: 2 * z * cz(z),
         lambda z: 1 / (2 - cz(z)) ** 2 + z * z, 0.6),
    ]


def _manufactured_error(case, shape):
    w, wz, wzb, q0 = case
    g = DiscGrid(*shape)
    z = g.z
    q = q0 * np.exp(1j * z.real) * (0.5 + 0.5 * np.abs(z) ** 2)
    problem = BeltramiProblem(GridFunction(q, g), GridFunction(wzb(z) - q * wz(z), g))
    sol = solve_beltrami(problem, RiemannHilbert.matching(GridFunction(w(z), g)))
    return sol.residual_norm, float(np.abs(sol.w.values - w(z)).max())


def test_criterion_3_beltrami_manufactured():
    rows = []
    for case in _beltrami_cases():
        res, err = _manufactured_error(case, (64, 256))
        _, err_fine = _manufactured_error(case, (128, 512))
        rows.append((case[3], res, err, err / err_fine))
    ok = (all(r[1] < 1e-8 and r[2] < 1e-6 and r[3] >= 4 for r in rows)
          and {r[0] for r in rows} == {0.0, 0.3, 0.6})
    record(3, ok, "; ".join(f"q0={q0}: res {res:.0e} err {err:.0e} x{ratio:.1f}"
                            for q0, res, err, ratio in rows))
    assert ok


def test_criterion_4_taming_equivalence():
    rng = np.random.default_rng(4)
    n = 10_000
    A = rng.normal(size=(n, 2, 2)) + 1j * rng.normal(size=(n, 2, 2))
    A *= (rng.uniform(0, 2, n) / operator_norm(A))[:, None, None]
    V = rng.normal(size=(n, 4))
    J = structure_from_matrix(A)
    tamed = operator_norm(A) < 1
    # "omega(V, JV) > 0 for all V" is the positivity of the symmetric form
    all_positive = np.linalg.eigvalsh(taming_form(J))[:, 0] > 0
    sampled = np.einsum("ni,ij,njk,nk->n", V, OMEGA, J, V)
    mismatches = int(np.count_nonzero(all_positive != tamed)
                     + np.count_nonzero(tamed & (sampled <= 0)))
    ok = mismatches == 0
    record(4, ok, f"{n} samples, {int(tamed.sum())} tamed, {mismatches} mismatches")
    assert ok


def test_criterion_5_lelong_bound():
    rep = lelong_batch(1000, (0.5, 1.0), rng=np.random.default_rng(5))
    line_gap = 0.0
    for d in [(1, 0), (0, 1), (1, 1), (1, 1j), (0.3, -2)]:
        for r in (0.5, 1.0):
            c = fit_candidate(AnalyticDiscCandidate.line(d), ball(r))
            line_gap = max(line_gap, abs(clipped_area(c, ball(r)) - np.pi * r * r))
    ok = rep["violations"] == 0 and line_gap < 1e-6
    record(5, ok, f"{rep['n_candidates']} candidates x radii {rep['radii']}, "
                  f"{rep['violations']} violations, min margin {rep['min_margin']:.1e}, "
                  f"line gap {line_gap:.1e}")
    assert ok


def test_criterion_6_rh_estimates():
    est = {}
    for G in (ball(0.5), ball(1.0), bidisc(), real_bidisc()):
        est[G.name] = rh_upper_estimate(G, budget=1200, refine_budget=200,
                                        rng=np.random.default_rng(6))
    rb = est["real_bidisc"]
    ok = (abs(est["ball(0.5)"].value - 0.5) < 1e-3 and abs(est["ball(1)"].value - 1) < 1e-3
          and abs(est["bidisc"].value - 1) < 1e-3
          and rb.value > 1 and rb.margin(1.0) > 0 and rb.n_candidates >= 1000)
    record(6, ok, ", ".join(f"{k} {v.value:.6f}" for k, v in est.items())
           + f"; real bidisc margin {rb.margin(1.0):.4f} over {rb.n_candidates} candidates")
    assert ok


def test_criterion_7_squeeze_pipeline():
    phi = HamiltonianMap(shear_hamiltonian(0.1), 1.0, 0.1)
    e = SqueezeExperiment(phi, ball(0.8), R=1.0, exhaustion=(3,))
    rep = run_squeeze_experiment(e)
    st = rep["stages"][-1]
    ok = (rep["status"] == "complete" and abs(st["disc_area"] - np.pi) < 1e-3
          and st["area_X_n"] <= np.pi + 1e-3 and st["transport_gap"] < 1e-3
          and st["through_p_error"] < 1e-8 and rep["certificate"])
    record(7, ok, f"|phi(0)| = {np.linalg.norm(rep['phi0']):.3f}, E(D) - pi = "
                  f"{st['disc_area'] - np.pi:.1e}, E(X_n) = {st['area_X_n']:.4f}, "
                  f"transport gap {st['transport_gap']:.1e}")
    assert ok


def test_criterion_8_admissibility(bump_structure, bump_foliation):
    F = bump_foliation
    discs = F.all_discs()
    thr = separation_threshold(F.grid)
    bdy = max(s.boundary_deviation for s in discs)
    windings = {s.winding for s in discs}
    same, cross = graph_separations(F)
    cover = torus_cover(F)
    probe, _ = restart_probe(bump_structure, F)
    rng = np.random.default_rng(8)
    zs = np.sqrt(rng.uniform(0, 1, 50)) * np.exp(2j * np.pi * rng.uniform(size=50))
    ws = rng.uniform(0.1, 1, 50) * np.exp(2j * np.pi * rng.uniform(size=50))
    interior = check_foliation_cover(F, (zs, ws), structure=bump_structure)
    ok = (bdy < 1e-8 and windings == {0} and min(same, cross) > thr and cover < thr
          and probe["max_difference"] < 1e-6 and interior["ok"])
    record(8, ok, f"boundary {bdy:.1e}, windings {sorted(windings)}, separation "
                  f"{min(same, cross):.4f} > {thr:.4f}, torus gap {cover:.1e}, "
                  f"restart {probe['max_difference']:.1e} over {probe['matched_discs']} discs, "
                  f"interior cover gap {interior['max_gap']:.1e}")
    assert ok


def test_criterion_9_symplectic_sanity():
    rng = np.random.default_rng(9)
    X = rng.uniform(-2, 2, (1000, 4))
    dlam = SymplecticContext().primitive_defect(X)
    Y = rng.uniform(-1.2, 1.2, (1000, 4))
    ham = max(HamiltonianMap(H, 1.0, 1e-2).symplectic_defect(Y)
              for H in (shear_hamiltonian(0.1), radial_bump_hamiltonian()))

    def rho(P):
        return np.sum(np.asarray(P) ** 2, axis=-1)
    levi_min, oracle_gap = np.inf, 0.0
    for _ in range(1000):
        p = rng.uniform(-1, 1, 4)
        V = rng.normal(size=4)
        V /= np.linalg.norm(V)
        L = levi_form(rho, p, V)
        levi_min = min(levi_min, L)
        oracle_gap = max(oracle_gap, abs(L - complex_hessian_form(rho, p, V)))
    ok = dlam < 1e-6 and ham < 1e-6 and levi_min > 0 and oracle_gap < 1e-4
    record(9, ok, f"|d lambda - omega| {dlam:.1e}, Hamiltonian defect {ham:.1e}, "
                  f"Levi min {levi_min:.4f}, oracle gap {oracle_gap:.1e}")
    assert ok
