import dataclasses

import numpy as np
import pytest

from dlimit import dispersion, fastslow
from dlimit.dispersion import SktParams


class TestCoexistence:
    def test_default_state(self):
        state = dispersion.coexistence_state(SktParams.default())
        assert state.u == pytest.approx(13 / 14)
        assert state.v == pytest.approx(6 / 14)
        assert state.u1 + state.u2 == pytest.approx(state.u)
        assert state.v1 + state.v2 == pytest.approx(state.v)

    def test_is_a_rest_point_of_the_fast_reaction_system(self):
        params = SktParams.default()
        s = dispersion.coexistence_state(params)
        rhs = dispersion.reaction_4comp(np.array([s.u1, s.u2, s.v1, s.v2]), params, 1e-3, 1e-3)
        np.testing.assert_allclose(rhs, 0.0, atol=1e-9)

    def test_degenerate(self):
        params = dataclasses.replace(SktParams.default(), a1=2.0, a2=10.0, b1=5.0, b2=4.0)
        with pytest.raises(dispersion.DegenerateCompetition):
            dispersion.coexistence_state(params)

    def test_nonpositive(self):
        with pytest.raises(dispersion.NonpositiveState):
            dispersion.coexistence_state(SktParams.default().with_r1(1.0))

    def test_positivity_window(self):
        lo, hi = dispersion.positivity_window(SktParams.default())
        assert (lo, hi) == pytest.approx((2.5, 25 / 3))

    def test_jacobian_matches_reaction(self):
        params = SktParams.default()
        eps, delta = 0.01, 0.02
        fastslow.check_jacobian(
            lambda t, z: dispersion.reaction_4comp(z, params, eps, delta),
            lambda t, z: dispersion.jacobian_4comp(z, params, eps, delta),
            np.array([0.5, 0.4, 0.3, 0.2]),
        )


class TestCounts:
    def test_limit_count(self):
        count = dispersion.count_bifurcations_limit(SktParams.default())
        assert count.count == 4
        assert count.crossing_r1_values == tuple(sorted(count.crossing_r1_values))
        assert count.max_relative_det < 1e-8

    def test_fast_reaction_matches_limit(self):
        params = SktParams.default()
        fast = dispersion.count_bifurcations_4comp(params, 1e-5, 1e-5)
        assert fast.count == dispersion.count_bifurcations_limit(params).count

    @pytest.mark.parametrize("eps,delta", [(1e-2, 1e-2), (1e-3, 1e-3), (1e-4, 1e-2)])
    def test_counts_on_the_ladder(self, eps, delta):
        count = dispersion.count_bifurcations_4comp(SktParams.default(), eps, delta)
        assert count.count in (2, 4)

    def test_stable_under_refinement(self):
        params = SktParams.default()
        coarse = dispersion.count_bifurcations_4comp(params, 1e-3, 1e-3, n_scan=500)
        fine = dispersion.count_bifurcations_4comp(params, 1e-3, 1e-3, n_scan=2000)
        assert coarse.count == fine.count

    def test_window_outside_positivity(self):
        with pytest.raises(dispersion.StateLeavesPositivity):
            dispersion.count_bifurcations_limit(SktParams.default(), (20.0, 30.0))

    def test_window_is_clipped(self, caplog):
        dispersion.count_bifurcations_limit(SktParams.default(), (0.1, 5.0), n_modes=4, n_scan=100)
        assert "clipped" in caplog.text

    def test_small_parameters_must_be_positive(self):
        with pytest.raises(ValueError):
            dispersion.count_bifurcations_4comp(SktParams.default(), 0.0, 1e-3)
