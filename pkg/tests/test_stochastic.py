import math

import numpy as np
import pytest
from scipy import stats

from dlimit import stochastic
from dlimit.kernel import derive_seed
from dlimit.stochastic import ProbEstimate, SpikeLabel


class TestProbEstimate:
    def test_wilson_interval(self):
        estimate = ProbEstimate.from_counts(50, 100, seed=3)
        assert estimate.p_hat == 0.5
        assert estimate.ci95[0] < 0.5 < estimate.ci95[1]
        assert estimate.straddles(0.5)
        assert not estimate.straddles(0.9)

    def test_extremes(self):
        none = ProbEstimate.from_counts(0, 100, seed=0)
        assert none.ci95[0] == 0.0
        assert none.ci95[1] < 0.05
        every = ProbEstimate.from_counts(100, 100, seed=0)
        assert every.ci95[1] == 1.0


class TestStrip:
    def test_slow_solution_solves_the_equation(self):
        eps = 0.1
        t = np.linspace(0, 5, 11)
        h = 1e-6
        derivative = (stochastic.slow_solution_sfs(t + h, eps) - stochastic.slow_solution_sfs(t - h, eps)) / (2 * h)
        np.testing.assert_allclose(eps * derivative, np.sin(t) - stochastic.slow_solution_sfs(t, eps), atol=1e-8)

    def test_needs_enough_paths(self):
        with pytest.raises(ValueError):
            stochastic.escape_probability_strip(0.1, 0.01, n_paths=10)

    def test_weak_noise_stays_inside(self):
        estimate = stochastic.escape_probability_strip(0.1, 1e-4, n_paths=100, base_seed=1)
        assert estimate.p_hat == 0.0

    def test_strong_noise_escapes(self):
        estimate = stochastic.escape_probability_strip(0.1, 1.0, n_paths=100, base_seed=1)
        assert estimate.p_hat > 0.9

    def test_reproducible(self):
        first = stochastic.escape_probability_strip(0.1, 0.1, n_paths=100, base_seed=5)
        second = stochastic.escape_probability_strip(0.1, 0.1, n_paths=100, base_seed=5)
        assert first == second

    def test_confidence_halfwidth(self):
        assert stochastic.confidence_halfwidth(0.1, 1.0, 0.01, 0.5) == pytest.approx(
            0.1 * math.sqrt(2 * math.log(200))
        )


class TestTranscriticalTransition:
    def test_slow_start_near_branch(self):
        assert stochastic.transcritical_slow_start(-1.0, 1e-6) == pytest.approx(1.0, abs=1e-5)
        assert stochastic.transcritical_slow_start(-1.0, 0.0, delta=0.44) == pytest.approx(1.2)

    def test_noise_drives_transitions(self):
        quiet = stochastic.transition_probability_transcritical(0.1, 1e-4, n_paths=100, base_seed=2)
        loud = stochastic.transition_probability_transcritical(0.1, 1.0, n_paths=100, base_seed=2)
        assert quiet.p_hat == 0.0
        assert loud.p_hat > quiet.p_hat

    @pytest.mark.slow
    def test_level_set_scales_with_three_quarters(self):
        ladder = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
        sigmas = [stochastic.transition_level(eps, n_paths=2000) for eps in ladder]
        fit = stats.linregress(np.log(ladder), np.log(sigmas))
        assert fit.slope == pytest.approx(0.75, abs=0.15)

    @pytest.mark.slow
    def test_avoided_crossing_saturates(self):
        # with delta > 0 the branches never meet
        ladder = [1e-3, 3e-3, 1e-2]
        estimates = [
            stochastic.transition_probability_transcritical(eps, 0.05, delta=0.1, n_paths=200, base_seed=4)
            for eps in ladder
        ]
        lo = max(e.ci95[0] for e in estimates)
        hi = min(e.ci95[1] for e in estimates)
        assert lo <= hi


class TestFitzHughNagumo:
    def test_a_from_delta(self):
        a = stochastic.fhn_a_from_delta(0.03)
        (_, _), delta, eigenvalues = stochastic.fhn_equilibrium(a, 0.01)
        assert delta == pytest.approx(0.03)
        product = eigenvalues[0] * eigenvalues[1]
        assert product.real == pytest.approx(1 / 0.01)
        assert (eigenvalues[0] + eigenvalues[1]).real == pytest.approx(-2 * 0.03 / 0.01)

    def test_respike_probability_is_one_half_on_the_balance_curve(self):
        eps, sigma = 0.01, 0.01
        assert stochastic.respike_probability(eps, sigma * sigma / eps, sigma) == pytest.approx(0.5)

    def test_no_spikes_without_motion(self):
        times = np.linspace(0.0, 10.0, 10001)
        a = stochastic.fhn_a_from_delta(0.03)
        x, y = np.full_like(times, a), np.full_like(times, a**3 - a)
        with pytest.raises(stochastic.NoSpikes) as info:
            stochastic.spike_statistics(times, x, y, 0.01, 0.03, 0.001)
        assert info.value.observed == 0

    def test_small_oscillations_use_the_distance_to_the_equilibrium(self):
        # a revolution elongated along y barely moves x
        eps, delta, sigma = 0.01, 0.03, 0.002
        a = stochastic.fhn_a_from_delta(delta)
        omega = math.sqrt(eps - delta * delta) / eps
        revolutions = 30
        times = np.arange(0.0, revolutions * 2 * math.pi / omega, 1e-3)
        x = a + 0.001 * np.cos(omega * times)
        y = a**3 - a + 0.05 * np.sin(omega * times)
        result = stochastic.spike_statistics(times, x, y, eps, delta, sigma)
        assert result.censored
        assert result.label == SpikeLabel.RareIsolated
        assert 2 * revolutions // 3 - 1 <= result.small_oscillations <= revolutions

    def test_simulation_shapes(self):
        times, x, y = stochastic.simulate_fhn(0.01, 0.03, 0.01, 1.0, [1, 2, 3])
        assert x.shape == y.shape == (3, times.size)
        assert np.all(np.isfinite(x))
        assert np.all(np.isfinite(y))

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "sigma,label",
        [(0.001, SpikeLabel.RareIsolated), (0.0025, SpikeLabel.Clusters), (0.01, SpikeLabel.Repeated)],
    )
    def test_regimes(self, sigma, label):
        seeds = [derive_seed(0, i) for i in range(10)]
        labels = []
        for result in stochastic.classify_fhn_seeds(0.01, 0.03, sigma, 200.0, seeds):
            labels.append(result.label)
        assert labels.count(label) >= 8

    @pytest.mark.slow
    def test_respike_fraction_on_the_balance_curve(self):
        eps, delta = 0.01, 0.03
        sigma = math.sqrt(delta * eps)
        seeds = [derive_seed(2, i) for i in range(10)]
        results = stochastic.classify_fhn_seeds(eps, delta, sigma, 400.0, seeds)
        theory = results[0].theoretical_respike
        assert theory == pytest.approx(0.5)
        fraction = float(np.mean([r.respike_fraction for r in results]))
        assert fraction == pytest.approx(theory, abs=0.15)

    @pytest.mark.slow
    def test_small_oscillation_count_grows_with_the_barrier(self):
        eps, delta = 0.01, 0.01
        sigmas = np.linspace(0.0015, 0.004, 6)
        seeds = [derive_seed(1, i) for i in range(4)]
        counts = []
        for sigma in sigmas:
            results = stochastic.classify_fhn_seeds(eps, delta, float(sigma), 400.0, seeds)
            counts.append(float(np.median([r.median_count for r in results])))
        barrier = delta**2 * math.sqrt(eps) / sigmas**2
        fit = stats.linregress(barrier, np.log1p(counts))
        assert fit.slope > 0
        assert fit.rvalue**2 > 0.8
