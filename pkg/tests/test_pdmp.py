import math

import numpy as np
import pytest
from scipy import linalg

from dlimit import pdmp
from dlimit.kernel import Axis, AxisPoint
from dlimit.pdmp import LinearSwitching, Stability


class TestLinearSwitching:
    def test_matrices_are_defective(self):
        for matrix in LinearSwitching(0.3, 0.1).matrices:
            assert pdmp.is_defective(matrix)
        assert not pdmp.is_defective(np.diag([1.0, 2.0]))

    @pytest.mark.parametrize("mode", [0, 1])
    def test_flow_is_the_matrix_exponential(self, mode):
        system = LinearSwitching(0.3, 0.1)
        state = np.array([0.4, -1.2])
        expected = linalg.expm(system.matrices[mode] * 1.7) @ state
        np.testing.assert_allclose(system.flow(mode, state, 1.7), expected, rtol=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            LinearSwitching(-0.1, 0.1)
        with pytest.raises(ValueError):
            LinearSwitching(0.1, 0.0)

    def test_replay_reproduces_simulation(self):
        system = LinearSwitching(0.2, 0.5)
        path = pdmp.simulate_linear(system, [1.0, 0.0], 10.0, seed=8)
        replayed = pdmp.replay_linear(system, [1.0, 0.0], 0, path.jumps, 10.0)
        np.testing.assert_allclose(replayed, path.states[-1], rtol=1e-12)


class TestThreshold:
    def test_density_is_normalized(self):
        density = pdmp.angular_density(0.2, n_cells=256)
        assert density.total_mass() == pytest.approx(1.0, abs=1e-9)
        assert np.all(density.rho0 >= 0)

    def test_positive_and_decreasing(self):
        values = [pdmp.threshold_G(eps) for eps in (0.5, 0.2, 0.1, 0.05)]
        assert all(g > 0 for g in values)
        assert values == sorted(values, reverse=True)

    def test_classification(self):
        g = pdmp.threshold_G(0.2, 256)
        assert pdmp.classify_pdl(0.2, 0.0, 256) is Stability.Unstable
        assert pdmp.classify_pdl(0.2, 2 * g, 256) is Stability.Stable
        assert pdmp.classify_pdl(0.2, g, 256) is Stability.Boundary

    def test_radial_lyapunov_reproducible(self):
        system = LinearSwitching(0.1, 0.2)
        assert pdmp.radial_lyapunov(system, 50.0, 4, 1) == pdmp.radial_lyapunov(system, 50.0, 4, 1)

    @pytest.mark.slow
    def test_threshold_agrees_with_monte_carlo(self):
        agree = 0
        grid = [(eps, delta) for eps in (0.05, 0.1, 0.2, 0.5, 1.0) for delta in (0.01, 0.03, 0.1, 0.3, 1.0)]
        for eps, delta in grid:
            label = pdmp.classify_pdl(eps, delta)
            estimate = pdmp.radial_lyapunov(LinearSwitching(delta, eps), 1000.0, 32)
            agree += (label is Stability.Stable) == estimate.stable
        assert agree >= 24

    @pytest.mark.slow
    def test_averaged_limit(self):
        rates = [abs(pdmp.radial_lyapunov(LinearSwitching(0.0, eps), 1000.0, 32).value) for eps in (0.5, 0.2, 0.1, 0.05)]
        assert rates == sorted(rates, reverse=True)


class TestLogistic:
    def test_densities_are_normalized(self):
        densities = pdmp.logistic_densities(1.0, 0.5)
        assert densities.mass0() + densities.mass1() == pytest.approx(1.0, abs=1e-10)

    def test_zero_flux(self):
        eps, delta = 1.0, 0.5
        densities = pdmp.logistic_densities(eps, delta)
        x = np.linspace(1.05, 1.95, 7)
        flux = delta * x * (1 - x) * densities.rho0(x) + x * (1 - x / 2) * densities.rho1(x)
        np.testing.assert_allclose(flux, 0.0, atol=1e-10)

    @pytest.mark.parametrize("eps,delta,bounded", [(0.5, 0.5, 1), (0.5, 0.5000001, 0), (1.0, 0.1, 1), (0.1, 1.0, 0)])
    def test_boundedness(self, eps, delta, bounded):
        assert pdmp.classify_bdd(eps, delta) == bounded

    @pytest.mark.parametrize(
        "point",
        [AxisPoint(Axis.SECOND_ZERO, 0.5), AxisPoint(Axis.EPS_ZERO, 0.5), AxisPoint(Axis.ORIGIN)],
    )
    def test_axis_distributions_are_probabilities(self, point):
        descriptor = pdmp.logistic_axis_distribution(point)
        assert sum(p0 + p1 for _, p0, p1 in descriptor.atoms) == pytest.approx(1.0)

    def test_flows_stay_in_the_interval(self):
        for mode in (0, 1):
            for t in (0.0, 0.5, 50.0, 5000.0):
                value = pdmp.logistic_flow(0.5, mode, np.array([1.5]), t)[0]
                assert 1.0 <= value <= 2.0

    def test_time_coordinates(self):
        tau0, tau1 = pdmp.logistic_time_coordinates(0.5)
        x, h = 1.4, 1e-6
        assert (tau0(x + h) - tau0(x - h)) / (2 * h) == pytest.approx(1 / abs(0.5 * x * (1 - x)), rel=1e-6)
        assert (tau1(x + h) - tau1(x - h)) / (2 * h) == pytest.approx(1 / abs(x * (1 - x / 2)), rel=1e-6)

    def test_histogram_accounts_for_all_time(self):
        path = pdmp.simulate_logistic(1.0, 0.5, 200.0, seed=2)
        coordinates = pdmp.logistic_time_coordinates(0.5)
        total = 0.0
        for mode in (0, 1):
            hist = pdmp.occupation_histogram(path, mode, 20, time_coordinate=coordinates[mode])
            total += float(hist.occupation.sum())
        assert total == pytest.approx(200.0, rel=1e-6)

    @pytest.mark.slow
    def test_histogram_matches_closed_form(self):
        eps, delta = 1.0, 0.5
        densities = pdmp.logistic_densities(eps, delta)
        path = pdmp.simulate_logistic(eps, delta, 20000.0, seed=0)
        coordinates = pdmp.logistic_time_coordinates(delta)
        for mode in (0, 1):
            hist = pdmp.occupation_histogram(path, mode, 40, transient=10.0, time_coordinate=coordinates[mode])
            assert pdmp.l1_distance(hist, densities, mode) < 0.05

    @pytest.mark.slow
    def test_mass_concentrates_near_one(self):
        eps, delta = 0.5, 1.0
        path = pdmp.simulate_logistic(eps, delta, 20000.0, seed=0)
        coordinates = pdmp.logistic_time_coordinates(delta)
        fractions = []
        for n_bins in (10, 100, 1000):
            hist = pdmp.occupation_histogram(path, 0, n_bins, transient=10.0, time_coordinate=coordinates[0])
            fractions.append(hist.density[0])
        assert fractions == sorted(fractions)
        assert math.isfinite(fractions[-1])
