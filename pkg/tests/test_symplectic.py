"""Tests for areas, the Liouville form and Hamiltonian maps."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jdisc.errors import AccuracyError, TamingError
from jdisc.grid import DiscGrid, GridFunction
from jdisc.structures import OMEGA, AlmostComplexStructure
from jdisc.symplectic import (HamiltonianMap, IdentityMap, SymplecticContext, area,
                              boundary_area, boundary_length, boundary_windings,
                              curve_liouville_integral, make_hamiltonian_map, measure,
                              metric_norm, radial_bump_hamiltonian, shear_hamiltonian,
                              smooth_step, standard_liouville, torus_area_law,
                              zero_hamiltonian)


@pytest.fixture(scope="module")
def grid():
    return DiscGrid(32, 128)


class TestDiscAreas:
    @pytest.mark.parametrize("c", [0.0, 0.5, 0.9j])
    def test_holomorphic_graph(self, grid, c):
        W = GridFunction(c * grid.z, grid)
        assert area(W) == pytest.approx(np.pi * (1 + abs(c) ** 2), abs=1e-10)
        assert boundary_area(W) == pytest.approx(np.pi * (1 + abs(c) ** 2), abs=1e-12)

    def test_antiholomorphic_graph_counts_negatively(self, grid):
        W = GridFunction(0.5 * np.conj(grid.z), grid)
        assert area(W) == pytest.approx(np.pi * 0.75, abs=1e-10)

    def test_stokes(self, grid):
        W = GridFunction(0.3 * np.exp(grid.z) + 0.2 * np.conj(grid.z) ** 2 * grid.z, grid)
        assert area(W) == pytest.approx(boundary_area(W), abs=1e-6)

    def test_z_scale(self, grid):
        W = GridFunction(0.25 + 0 * grid.z, grid)
        assert area(W, z_scale=2.0) == pytest.approx(4 * np.pi, abs=1e-10)

    def test_mask(self, grid):
        W = GridFunction(0 * grid.z, grid)
        inner = np.abs(grid.z) < 0.5
        assert 0 < area(W, mask=inner) < np.pi

    def test_flat_disc_measurement(self, grid):
        W = GridFunction(0.5 + 0 * grid.z, grid)
        m = measure(W)
        assert m.stokes_gap < 1e-12
        assert m.length == pytest.approx(2 * np.pi)
        assert m.ratio == pytest.approx(0.5)
        assert boundary_windings(W) == (1, 0)

    def test_boundary_length_of_tilted_disc(self, grid):
        W = GridFunction(grid.z, grid)   # boundary speed sqrt(2)
        assert boundary_length(W) == pytest.approx(2 * np.pi * np.sqrt(2))


class TestLiouville:
    def test_primitive(self, rng):
        assert SymplecticContext().primitive_defect(rng.uniform(-2, 2, (500, 4))) < 1e-9

    def test_gauge_change_keeps_primitive(self, rng):
        # lambda + d(x1 y2) is another primitive
        def lam(X):
            out = standard_liouville(X)
            out[..., 0] += X[..., 3]
            out[..., 3] += X[..., 0]
            return out
        assert SymplecticContext(liouville=lam).primitive_defect(rng.normal(size=(50, 4))) < 1e-9

    def test_wrong_primitive_detected(self, rng):
        ctx = SymplecticContext(liouville=lambda X: 2 * standard_liouville(X))
        assert ctx.primitive_defect(rng.normal(size=(10, 4))) > 0.5

    @settings(max_examples=25, deadline=None)
    @given(st.integers(-3, 3), st.integers(-3, 3), st.floats(0.1, 1.0))
    def test_torus_area_law(self, k, m, t):
        s = 2 * np.pi * np.arange(256) / 256
        z = np.exp(1j * k * s)
        w = t * np.exp(1j * (m * s + 0.3))
        assert curve_liouville_integral(z, w) == pytest.approx(torus_area_law(t, k, m),
                                                               abs=1e-10)


class TestMetric:
    def test_standard_metric_is_euclidean(self, rng):
        V = rng.normal(size=4)
        assert metric_norm(V, np.zeros(4)) == pytest.approx(np.linalg.norm(V))

    def test_untamed_point_rejected(self):
        S = AlmostComplexStructure(lambda z, w: np.broadcast_to(
            np.array([[1.2, 0], [0, 0]], dtype=complex), np.shape(z) + (2, 2)))
        with pytest.raises(TamingError):
            metric_norm(np.ones(4), np.zeros(4), SymplecticContext(structure=S))


@pytest.fixture(scope="module")
def shear():
    return HamiltonianMap(shear_hamiltonian(0.1), 1.0, 0.1)


class TestHamiltonianMaps:
    def test_symplectic(self, shear, rng):
        assert shear.symplectic_defect(rng.uniform(-1.5, 1.5, (500, 4))) < 1e-12

    def test_volume_preserving(self, shear, rng):
        M = shear.jacobian(rng.uniform(-1, 1, (200, 4)))
        assert np.abs(np.linalg.det(M) - 1).max() < 1e-12

    def test_jacobian_against_finite_differences(self, shear, rng):
        X = rng.uniform(-1, 1, (20, 4))
        assert np.abs(shear.jacobian(X) - shear.fd_jacobian(X)).max() < 1e-7

    def test_inverse(self, shear, rng):
        X = rng.uniform(-1.5, 1.5, (300, 4))
        assert np.abs(shear.inverse(shear.forward(X)) - X).max() < 1e-13

    def test_compact_support(self, shear):
        X = np.array([[2.0, 0.1, 0.0, 0.3]])
        assert np.array_equal(shear.forward(X), X)

    def test_energy_nearly_conserved(self, rng):
        H = shear_hamiltonian(0.1)
        phi = HamiltonianMap(H, 1.0, 0.01)
        X = rng.uniform(-0.8, 0.8, (100, 4))
        assert np.abs(H.value(phi.forward(X)) - H.value(X)).max() < 1e-5

    def test_radial_flow_keeps_spheres(self, rng):
        phi = make_hamiltonian_map(radial_bump_hamiltonian(), 1.0, 0.05)
        X = rng.uniform(-0.6, 0.6, (100, 4))
        Y = phi.forward(X)
        assert np.allclose(np.linalg.norm(Y, axis=1), np.linalg.norm(X, axis=1), atol=1e-12)
        assert np.abs(Y - X).max() > 1e-2

    def test_origin_moves_along_x1(self, shear):
        # near 0 the vector field is OMEGA grad H = strength * (1, 0, 0, 0) + O(|X|)
        p = shear.forward(np.zeros(4))
        assert p[0] == pytest.approx(0.1, abs=1e-3)
        assert np.abs(p[1:]).max() < 1e-2

    def test_zero_hamiltonian_is_identity(self, rng):
        phi = HamiltonianMap(zero_hamiltonian(), 1.0, 0.5)
        X = rng.normal(size=(5, 4))
        assert np.array_equal(phi.forward(X), X)

    def test_identity_map(self, rng):
        X = rng.normal(size=(3, 4))
        Y, M = IdentityMap().forward_with_jacobian(X)
        assert np.array_equal(Y, X) and np.array_equal(M, np.broadcast_to(np.eye(4), (3, 4, 4)))

    def test_stiff_step_rejected(self):
        with pytest.raises(AccuracyError):
            HamiltonianMap(radial_bump_hamiltonian(50.0), 1.0, 1.0)

    def test_complex_interface(self, shear):
        z, w = shear(0.0, 0.0)
        assert abs(z - 0.1) < 1e-3


def test_smooth_step_limits():
    u = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    assert np.allclose(smooth_step(u), [0, 0, 0.5, 1, 1])


def test_omega_is_standard_form():
    assert np.allclose(OMEGA, -OMEGA.T)
