import math
from unittest import mock

import numpy as np
import pytest

from dlimit import fastslow
from dlimit.fastslow import OscKind, TcLabel
from dlimit.kernel import DlimitInputError, Trajectory


class TestTranscritical:
    @pytest.mark.parametrize("eps", [0.005, 0.0199, 0.31])
    def test_eps_outside_resolvable_range(self, eps):
        with pytest.raises(DlimitInputError):
            fastslow.check_tc_eps(eps)

    def test_floor_message(self):
        with pytest.raises(DlimitInputError, match="0.02"):
            fastslow.check_tc_eps(0.005)

    def test_three_labels(self):
        eps = 0.1
        root = math.sqrt(eps)
        assert fastslow.classify_transcritical(eps, eps * (1 + root)) is TcLabel.ExchangeOfStability
        assert fastslow.classify_transcritical(eps, eps * (1 - root)) is TcLabel.CriticalTransition
        assert fastslow.classify_transcritical(eps, eps) is TcLabel.Canard

    def test_canard_stays_on_the_diagonal(self):
        trajectory, label = fastslow.integrate_transcritical(0.1, 0.1)
        assert label is TcLabel.Canard
        np.testing.assert_allclose(trajectory.states[:, 0], trajectory.states[:, 1], atol=1e-9)

    def test_classify_checks_eps(self):
        with pytest.raises(DlimitInputError):
            fastslow.classify_transcritical(0.5, 0.1)

    def test_fenichel_distance(self):
        assert fastslow.fenichel_distance(0.1, 0.1) < 1e-9
        assert fastslow.fenichel_distance(0.1, 0.2) < 0.2

    @pytest.mark.slow
    def test_flip_interval_shrinks(self):
        widths = [fastslow.flip_interval(eps).width for eps in (0.2, 0.1, 0.05)]
        assert all(w > 0 for w in widths)
        assert widths[0] > widths[1] > widths[2]


def _linear_field(t, y):
    return np.array([0.5 * y[0], -y[1]])


def _linear_jacobian(t, y):
    return np.array([[0.5, 0.0], [0.0, -1.0]])


class TestLyapunov:
    def test_benettin_on_a_linear_flow(self):
        estimate = fastslow.top_lyapunov_benettin(_linear_field, _linear_jacobian, [1.0, 1.0], 20.0, 1.0)
        assert estimate.value == pytest.approx(0.5, abs=0.02)
        assert estimate.sign == 1

    def test_jacobian_check(self):
        fastslow.check_jacobian(_linear_field, _linear_jacobian, np.array([1.0, 2.0]))
        with pytest.raises(fastslow.JacobianMismatch):
            fastslow.check_jacobian(_linear_field, lambda t, y: np.eye(2), np.array([1.0, 2.0]))

    def test_olsen_jacobian_matches_rhs(self):
        params = fastslow.OlsenParams.default()
        eps, delta = 0.05, 0.025
        fastslow.check_jacobian(
            fastslow.olsen_field(eps, delta, params),
            lambda t, z: fastslow.olsen_jacobian(z, eps, delta, params),
            np.array([1.0, 0.5, 0.3, 0.2]),
        )

    @pytest.mark.parametrize(
        "value,stderr,sign", [(0.1, 0.01, 1), (-0.1, 0.01, -1), (0.01, 0.01, 0)]
    )
    def test_sign(self, value, stderr, sign):
        assert fastslow.LyapunovEstimate(value, stderr).sign == sign


def test_count_maxima():
    t = np.linspace(0, 10 * 2 * math.pi, 20001)
    traj = Trajectory(t, np.sin(t))
    # maxima at pi/2 + 2 pi k
    assert fastslow.count_maxima(traj, 0, (0.0, 4 * math.pi)) == 2
    assert fastslow.count_maxima(traj, 0, (0.0, t[-1])) == 10
    with pytest.raises(ValueError):
        fastslow.count_maxima(traj, 0, (0.0, 100.0))


@pytest.mark.slow
def test_olsen_relaxation_at_calibration_point():
    eps = 0.05
    label = fastslow.classify_olsen(eps, 10 * eps**2, 20 / eps)
    assert label.kind is OscKind.Relaxation
    assert label.conjectural
    assert label.maxima_count > 0


class TestOlsenWindows:
    def classify(self, counts, lyapunov=-0.5):
        state = np.array(fastslow.OlsenConfig.default().state0)
        side_effect = [(count, state) for count in counts]
        with mock.patch.object(fastslow, "olsen_maxima", side_effect=side_effect), mock.patch.object(
            fastslow, "top_lyapunov_benettin", return_value=fastslow.LyapunovEstimate(lyapunov, 0.01)
        ):
            return fastslow.classify_olsen(0.05, 2.5e-5, 1.0, k0=3)

    def test_disagreeing_windows_are_indeterminate(self):
        with pytest.raises(fastslow.Indeterminate, match="3 and 7"):
            self.classify([3, 7])

    @pytest.mark.parametrize("count,kind", [(3, OscKind.Relaxation), (5, OscKind.MMO)])
    def test_agreeing_windows(self, count, kind):
        label = self.classify([count, count])
        assert label.kind is kind
        assert label.window_counts == (count, count)

    def test_chaotic_is_not_gated_by_counts(self):
        assert self.classify([3, 7], lyapunov=0.5).kind is OscKind.Chaotic


@pytest.mark.slow
def test_olsen_mixed_mode_oscillations():
    eps = 0.05
    k0 = fastslow.calibrate_k0(eps, 20 / eps)
    label = fastslow.classify_olsen(eps, 0.01 * eps**2, 20 / eps, k0=k0)
    assert label.kind is OscKind.MMO
    assert label.window_counts[0] == label.window_counts[1] > k0
