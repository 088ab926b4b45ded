"""Tests for the polar grids, Wirtinger derivatives and quadrature."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jdisc.errors import ResolutionError, WindingError
from jdisc.grid import (AnnulusGrid, DiscGrid, GridFunction, d_z, d_zbar, fd_weights,
                        integrate, winding_number)


@pytest.fixture(scope="module")
def grid():
    return DiscGrid(64, 256)


class TestConstruction:
    def test_nodes_reach_the_circle(self, grid):
        assert grid.includes_boundary
        assert grid.radial_nodes[0] > 0
        assert grid.shape == (64, 256)

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError):
            DiscGrid(32, 100)

    def test_spacing(self, grid):
        dr = np.diff(grid.radial_nodes).max()
        assert grid.spacing == pytest.approx(max(dr, 2 * np.pi / 256))

    def test_refined_doubles(self, grid):
        assert grid.refined().shape == (128, 512)


class TestFiniteDifferenceWeights:
    def test_exact_on_polynomials(self):
        xs = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
        w = fd_weights(0.3, xs, deriv=1)
        for k in range(5):
            assert w @ xs**k == pytest.approx(k * 0.3 ** (k - 1) if k else 0.0, abs=1e-12)


class TestWirtinger:
    def test_holomorphic_monomials(self, grid):
        z = grid.z
        for k in range(1, 5):
            f = GridFunction(z**k, grid)
            assert np.abs(d_zbar(f).values).max() < 1e-10
            assert np.abs(d_z(f).values - k * z ** (k - 1)).max() < 1e-8

    def test_antiholomorphic(self, grid):
        z = grid.z
        f = GridFunction(np.conj(z) ** 2 * z, grid)
        assert np.abs(d_zbar(f).values - 2 * np.conj(z) * z).max() < 1e-8
        assert np.abs(d_z(f).values - np.conj(z) ** 2).max() < 1e-8

    def test_smooth_function_converges(self):
        errs = []
        for n in (16, 32, 64):
            g = DiscGrid(n, 4 * n)
            z = g.z
            f = np.exp(z * np.conj(z))
            errs.append(np.abs(g.d_zbar(f) - z * f).max())
        assert errs[0] / errs[1] > 8 and errs[1] / errs[2] > 8

    def test_unresolved_function_raises(self):
        g = DiscGrid(16, 16)
        noisy = GridFunction(np.random.default_rng(0).normal(size=g.shape), g)
        with pytest.raises(ResolutionError):
            d_zbar(noisy)


class TestQuadrature:
    def test_disc_area(self, grid):
        assert integrate(GridFunction(np.ones(grid.shape), grid)).real == pytest.approx(np.pi,
                                                                                   abs=1e-10)

    def test_cubic_integrand_exact(self, grid):
        f = GridFunction(np.abs(grid.z) ** 2, grid)
        assert integrate(f).real == pytest.approx(np.pi / 2, abs=1e-12)

    @pytest.mark.parametrize("k", [2, 3, 4])
    def test_radial_moments_fourth_order(self, k):
        errs = []
        for n in (32, 64, 128):
            g = DiscGrid(n, 64)
            errs.append(abs(g.integrate(np.abs(g.z) ** (2 * k)).real - np.pi / (k + 1)))
        assert errs[0] / errs[1] > 12 and errs[1] / errs[2] > 12

    def test_annulus_area(self):
        a = AnnulusGrid(0.5, 32, 128)
        assert a.integrate(np.ones(a.shape)).real == pytest.approx(np.pi * 0.75, abs=1e-9)

    def test_boundary_integral(self, grid):
        g = np.exp(1j * grid.theta) ** 2 + 3
        assert grid.boundary_integral(g) == pytest.approx(6 * np.pi)

    def test_nonfinite_rejected(self, grid):
        f = np.ones(grid.shape)
        f[3, 4] = np.nan
        with pytest.raises(ValueError):
            grid.integrate(f)


class TestInterpolation:
    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.0, 0.999), st.floats(-np.pi, np.pi))
    def test_smooth_function(self, r, th):
        g = DiscGrid(32, 128)
        p = r * np.exp(1j * th)
        f = np.exp(g.z) + np.conj(g.z) ** 2
        assert abs(g.evaluate(f, p) - (np.exp(p) + np.conj(p) ** 2)) < 1e-7


class TestWinding:
    @pytest.mark.parametrize("k", [-2, -1, 0, 1, 3])
    def test_circle_powers(self, k):
        th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        assert winding_number(np.exp(1j * k * th) * 2 + (0.5 if k == 0 else 0)) == k

    def test_zero_raises(self):
        with pytest.raises(WindingError):
            winding_number(np.array([1, 0, -1, 1j]))

    def test_undersampled_raises(self):
        th = np.linspace(0, 2 * np.pi, 8, endpoint=False)
        with pytest.raises(ResolutionError):
            winding_number(np.exp(4j * th))


class TestSerialization:
    def test_csv_round_trip(self, tmp_path):
        g = DiscGrid(8, 16)
        f = GridFunction.from_callable(g, lambda z: z**2 - 1j * np.conj(z))
        f.save_csv(tmp_path / "f.csv")
        assert np.array_equal(GridFunction.load_csv(g, tmp_path / "f.csv").values, f.values)

    def test_binary_round_trip(self, tmp_path):
        g = DiscGrid(8, 16)
        f = GridFunction.from_callable(g, np.exp)
        f.save_binary(tmp_path / "f.bin")
        assert np.array_equal(GridFunction.load_binary(g, tmp_path / "f.bin").values, f.values)

    def test_wrong_grid_rejected(self):
        g = DiscGrid(8, 16)
        f = GridFunction.from_callable(g, lambda z: z)
        with pytest.raises(ValueError):
            GridFunction.from_records(DiscGrid(8, 32), f.to_records())

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            GridFunction(np.zeros((3, 3)), DiscGrid(8, 16))
