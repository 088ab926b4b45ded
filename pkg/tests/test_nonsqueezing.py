"""Tests for clipped areas, radius estimates and the squeeze pipeline."""

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from jdisc.errors import SetupError
from jdisc.grid import DiscGrid
from jdisc.nonsqueezing import (PRESETS, AnalyticDiscCandidate, DomainSpec, SqueezeExperiment,
                                ball, bidisc, candidate_radius, clipped_area, clipped_integral,
                                cylinder, distance_to_circles, escape_radius, fit_candidate,
                                lelong_check, monte_carlo_area, random_candidate,
                                real_bidisc, real_bidisc_probe, rh_upper_estimate,
                                run_squeeze_experiment, sphere_contact_points)
from jdisc.symplectic import HamiltonianMap, IdentityMap, shear_hamiltonian

coefficient = st.complex_numbers(max_magnitude=1.5, allow_nan=False, allow_infinity=False)


class TestCandidates:
    def test_passes_through_origin(self, rng):
        c = random_candidate(rng)
        z, w = c(0.0)
        assert z == 0 and w == 0

    def test_constant_rejected(self):
        with pytest.raises(ValueError):
            AnalyticDiscCandidate((0,), (0,))

    def test_padding_and_degree(self):
        c = AnalyticDiscCandidate((1,), (0, 1))
        assert c.degree == 2 and c.a == (1, 0)

    def test_coefficient_round_trip(self, rng):
        c = random_candidate(rng)
        back = AnalyticDiscCandidate.from_coefficients(c.coefficients(), c.degree)
        assert back == c

    def test_derivative_against_difference_quotient(self, rng):
        c = random_candidate(rng)
        zeta, h = 0.3 + 0.2j, 1e-6
        exact = c.derivative(zeta)
        for fd, d in zip((np.subtract(*p) / (2 * h) for p in zip(c(zeta + h), c(zeta - h))),
                         exact):
            assert abs(fd - d) < 1e-8

    def test_injectivity(self):
        assert AnalyticDiscCandidate.line((1, 1j)).is_injective()
        # zeta and -zeta share an image point
        assert not AnalyticDiscCandidate((0, 1), (0, 0.5)).is_injective()


class TestDomains:
    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_presets_contain_origin(self, name):
        assert PRESETS[name]().contains(np.zeros(4))

    def test_samples_lie_in_closure(self, rng):
        for G in (ball(0.7), bidisc(), real_bidisc()):
            assert np.all(G.gauge(G.sample(2000, rng)) <= 1 + 1e-12)

    def test_scaling(self):
        G = ball(1.0).scaled(0.5)
        assert G.contains(np.array([0.49, 0, 0, 0]))
        assert not G.contains(np.array([0.51, 0, 0, 0]))
        assert G.radius == 0.5

    def test_scaling_needs_star_shape(self):
        G = DomainSpec("odd", lambda X: np.linalg.norm(X, axis=-1), 1.0, star_shaped=False)
        with pytest.raises(ValueError):
            G.scaled(2.0)


class TestClippedArea:
    @pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
    def test_line_in_ball(self, r):
        c = fit_candidate(AnalyticDiscCandidate.line((1, 1j)), ball(r))
        assert c.rho == pytest.approx(r, rel=1e-8)   # escape margin
        assert clipped_area(c, ball(r)) == pytest.approx(np.pi * r * r, rel=1e-9)

    def test_diagonal_line_in_bidisc(self):
        # |zeta| / sqrt(2) < 1: the piece is a disc of radius sqrt(2)
        val, c = candidate_radius(AnalyticDiscCandidate.line((1, 1)), bidisc())
        assert c.rho == pytest.approx(np.sqrt(2), rel=1e-8)
        assert val == pytest.approx(np.sqrt(2), rel=1e-9)

    def test_parabola_against_monte_carlo(self):
        c = fit_candidate(AnalyticDiscCandidate((1,), (0, 1)), ball(1.0))
        E = clipped_area(c, ball(1.0))
        mc, se = monte_carlo_area(c, ball(1.0), n=10**6)
        assert abs(E - mc) < 4 * se
        # |zeta|^2 + |zeta|^4 < 1 is a disc and the density is 1 + 4 |zeta|^2
        s2 = (np.sqrt(5) - 1) / 2
        assert E == pytest.approx(np.pi * (s2 + 2 * s2**2), rel=1e-9)

    def test_escape_radius_unbounded(self):
        assert escape_radius(AnalyticDiscCandidate.line((0, 1)), cylinder()) == np.inf
        val, c = candidate_radius(AnalyticDiscCandidate.line((0, 1)), cylinder())
        assert val == np.inf and c is None

    def test_cylinder_slice(self):
        val, _ = candidate_radius(AnalyticDiscCandidate.line((1, 0)), cylinder(0.7))
        assert val == pytest.approx(0.7, rel=1e-9)

    @settings(max_examples=20, deadline=None)
    @given(st.lists(coefficient, min_size=1, max_size=3),
           st.lists(coefficient, min_size=1, max_size=3), st.floats(0.3, 1.5))
    def test_lelong_bound(self, a, b, r):
        assume(max(map(abs, a + b)) > 1e-3)
        rep = lelong_check(AnalyticDiscCandidate(tuple(a), tuple(b)), r)
        assert rep["ok"], rep

    def test_lelong_needs_escaping_candidate(self):
        # escape would need a parameter radius near 1e10
        with pytest.raises(ValueError):
            lelong_check(AnalyticDiscCandidate((1e-10,), (0,)), 1.0)


class TestRadiusEstimate:
    def test_ball_radius(self):
        est = rh_upper_estimate(ball(0.5), budget=60, refine_budget=10)
        assert est.value == pytest.approx(0.5, rel=1e-8)
        assert est.evaluations <= 60 and est.label == "upper estimate"

    def test_monotone_under_inclusion(self):
        small = rh_upper_estimate(ball(0.6), budget=40, refine_budget=0)
        large = rh_upper_estimate(ball(0.9), budget=40, refine_budget=0)
        assert small.value <= large.value

    def test_refinement_never_worsens(self):
        est = rh_upper_estimate(real_bidisc(), budget=80, refine_budget=40)
        assert est.value <= est.sampled_best

    def test_domain_must_contain_origin(self):
        off = DomainSpec("off", lambda X: np.linalg.norm(X - 3.0, axis=-1), 4.0)
        with pytest.raises(ValueError):
            rh_upper_estimate(off, budget=5)


class TestRealBidisc:
    def test_contact_points_on_circles(self, rng):
        X = sphere_contact_points(200, rng)
        assert np.abs(np.linalg.norm(X, axis=1) - 1).max() < 1e-12
        assert distance_to_circles(X).max() < 1e-8

    def test_probe(self):
        rep = real_bidisc_probe(n_samples=2000)
        assert rep["ok"]
        assert rep["ball_inside_real_bidisc"]["failures"] == 0
        assert rep["min_excess"] > 0


class TestClippedIntegral:
    def test_disc_of_radius_half(self):
        g = DiscGrid(16, 64)
        level = np.abs(g.z) - 0.5
        assert clipped_integral(g, np.ones(g.shape), level) == pytest.approx(np.pi / 4,
                                                                             rel=1e-12)

    def test_everything_inside(self):
        g = DiscGrid(16, 64)
        assert clipped_integral(g, np.ones(g.shape), -np.ones(g.shape)) == pytest.approx(
            np.pi, rel=1e-12)


class TestSqueeze:
    def test_identity_squeeze(self):
        # J stays standard and the disc through the origin is horizontal
        e = SqueezeExperiment(IdentityMap(), ball(0.8), R=1.0, exhaustion=(3, 4),
                              resolution=(16, 64))
        rep = run_squeeze_experiment(e)
        assert rep["status"] == "complete" and rep["certificate"]
        for s in rep["stages"]:
            r = s["K_scale"] * 0.8
            assert s["area_X_n"] == pytest.approx(np.pi * r * r, rel=1e-10)
            assert s["disc_area"] == pytest.approx(np.pi, abs=1e-10)
            assert s["transport_gap"] < 1e-10
        assert rep["monotone_areas"]

    def test_image_must_fit_cylinder(self):
        with pytest.raises(SetupError):
            run_squeeze_experiment(SqueezeExperiment(IdentityMap(), ball(1.2), R=1.0))

    def test_unbounded_domain_rejected(self):
        with pytest.raises(SetupError):
            run_squeeze_experiment(SqueezeExperiment(IdentityMap(), cylinder(0.5)))

    def test_shear_at_low_resolution(self):
        phi = HamiltonianMap(shear_hamiltonian(0.1), 1.0, 0.1)
        e = SqueezeExperiment(phi, ball(0.8), R=1.0, exhaustion=(3,), resolution=(32, 128))
        s = run_squeeze_experiment(e)["stages"][0]
        assert s["through_p_error"] < 1e-8
        assert s["area_X_n"] < np.pi
        assert s["transport_gap"] < 1e-3
