"""Tests for attaching J-holomorphic discs to the tori ``bD x t bD``."""

import numpy as np
import pytest

from jdisc.attach import (Anderson, DiscSolution, TorusTarget, attach_disc, fine_grid_residual,
                          flat_disc, graph_coefficients, graph_residual,
                          verify_admissible_disc)
from jdisc.errors import AttachFailure, DegeneracyError, HomotopyClassError
from jdisc.grid import DiscGrid, GridFunction
from jdisc.structures import (AlmostComplexStructure, bump_perturbation, flat_triangular,
                              structure_from_matrix, to_real)
from jdisc.symplectic import area, boundary_area


@pytest.fixture(scope="module")
def grid():
    return DiscGrid(32, 128)


@pytest.fixture(scope="module")
def bump_disc(grid):
    return attach_disc(bump_perturbation(), TorusTarget(0.5), tau=0.3, grid=grid)


class TestFlat:
    @pytest.mark.parametrize("t,tau", [(0.1, 0.0), (0.5, 1.0), (1.0, -2.0)])
    def test_constant_solution(self, grid, t, tau):
        s = attach_disc(flat_triangular(), TorusTarget(t), tau, grid=grid)
        assert np.abs(s.values - t * np.exp(1j * tau)).max() < 1e-12
        assert area(s) == pytest.approx(np.pi, abs=1e-12)

    def test_flat_disc_helper(self, grid):
        s = flat_disc(0.4, 0.5, grid)
        assert verify_admissible_disc(s).ok


class TestBump:
    def test_converged(self, bump_disc):
        assert bump_disc.residual_norm < 1e-10
        assert bump_disc.boundary_deviation < 1e-10
        assert bump_disc.normalization_error < 1e-10
        assert bump_disc.winding == 0

    def test_disc_is_bent(self, bump_disc):
        assert np.abs(bump_disc.values - 0.5 * np.exp(0.3j)).max() > 1e-3

    def test_area_and_stokes(self, bump_disc):
        assert area(bump_disc) == pytest.approx(np.pi, abs=1e-6)
        assert boundary_area(bump_disc) == pytest.approx(np.pi, abs=1e-12)

    def test_admissible(self, bump_disc):
        rep = verify_admissible_disc(bump_disc)
        assert rep.ok and rep.embedding_distance > 0

    def test_fine_grid_residual_converges(self, bump_disc):
        S = bump_perturbation()
        finer = attach_disc(S, TorusTarget(0.5), tau=0.3, grid=DiscGrid(64, 256))
        coarse, fine = fine_grid_residual(S, bump_disc), fine_grid_residual(S, finer)
        assert fine < 5e-4 and coarse / fine > 6

    def test_phase_equivariance(self, grid):
        S = bump_perturbation(equivariant=True)
        s0 = attach_disc(S, TorusTarget(0.5), 0.0, grid=grid)
        s1 = attach_disc(S, TorusTarget(0.5), 1.2, grid=grid)
        assert np.abs(s1.values - np.exp(1.2j) * s0.values).max() < 1e-9

    def test_general_structure_path_agrees(self, grid, bump_disc):
        S = bump_perturbation().as_structure()
        s = attach_disc(S, TorusTarget(0.5), 0.3, grid=grid)
        assert np.abs(s.values - bump_disc.values).max() < 1e-9


class TestGraphEquation:
    def test_general_coefficients_give_j_invariant_tangents(self):
        # constant A with a12, a22 nonzero; linear W solves the graph equation
        A0 = np.array([[0.2, 0.15j], [0.1, -0.2]])
        S = AlmostComplexStructure(lambda z, w: np.broadcast_to(A0, np.shape(z) + (2, 2)))
        g = DiscGrid(16, 32)
        Wz = 0.3 - 0.2j
        Wzb = 0j
        for _ in range(100):
            W = Wz * g.z + Wzb * np.conj(g.z)
            q, Q = graph_coefficients(S, g, W, np.full(g.shape, Wz), np.full(g.shape, Wzb))
            Wzb = q.flat[0] * Wz + Q.flat[0]
        W = Wz * g.z + Wzb * np.conj(g.z)
        assert np.abs(graph_residual(S, g, W)).max() < 1e-12
        ux = to_real(1.0, Wz + Wzb)
        uy = to_real(1j, 1j * (Wz - Wzb))
        J = structure_from_matrix(A0)
        plane = np.stack([ux, uy], axis=1)
        coef = np.linalg.lstsq(plane, J @ ux, rcond=None)[0]
        assert np.abs(plane @ coef - J @ ux).max() < 1e-12


class TestFailures:
    def test_winding_guess(self, grid):
        w = GridFunction(0.5 * grid.z + 0.01, grid)
        with pytest.raises(HomotopyClassError):
            attach_disc(flat_triangular(), TorusTarget(0.5), w_init=w)

    def test_vanishing_guess(self, grid):
        v = np.full(grid.shape, 0.5 + 0j)
        v[5, 7] = 0
        w = GridFunction(v, grid)
        with pytest.raises(DegeneracyError):
            attach_disc(flat_triangular(), TorusTarget(0.5), w_init=w)

    def test_iteration_cap(self, grid):
        with pytest.raises(AttachFailure):
            attach_disc(bump_perturbation(), TorusTarget(0.5), grid=grid, max_iter=2)

    def test_torus_radius(self):
        with pytest.raises(ValueError):
            attach_disc(flat_triangular(), TorusTarget(0.5, R=2.0))
        with pytest.raises(ValueError):
            TorusTarget(0.0)

    def test_admissibility_flags(self, bump_disc):
        off = DiscSolution(**{**bump_disc.__dict__,
                              "w": GridFunction(bump_disc.values * 1.01, bump_disc.grid)})
        rep = verify_admissible_disc(off)
        assert "boundary" in rep.failures and "normalization" in rep.failures


def test_torus_is_totally_real():
    assert TorusTarget(0.5).is_totally_real(bump_perturbation(0.9).as_structure())


def test_save_load_round_trip(bump_disc, tmp_path):
    bump_disc.save(tmp_path / "d.csv")
    back = DiscSolution.load(tmp_path / "d.csv")
    assert np.array_equal(back.values, bump_disc.values)
    assert back.t == bump_disc.t and back.residual_norm == bump_disc.residual_norm


def test_anderson_accelerates_linear_fixed_point():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(20, 20))
    M *= 0.95 / np.abs(np.linalg.eigvals(M)).max()
    c = rng.normal(size=20)
    exact = np.linalg.solve(np.eye(20) - M, c)
    mixer = Anderson(6)
    x = y = np.zeros(20)
    for _ in range(60):
        x = mixer.step(x, M @ x + c)
        y = M @ y + c
    err, plain = np.abs(x - exact).max(), np.abs(y - exact).max()
    assert err < 1e-6 and err < 1e-3 * plain
