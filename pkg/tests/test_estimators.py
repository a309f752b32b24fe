import numpy as np
import pytest

from oracles import msd_loop, t_stat_loop
from trajclass.errors import DegenerateTrajectoryError, InsufficientDataError, ParameterError
from trajclass.estimators import (
    MSD_CODES,
    SigmaMethod,
    default_fit_lags,
    estimate_sigma,
    loglog_slope_batch,
    msd_classify,
    msd_classify_batch,
    msd_curve,
    sigma1,
    sigma2,
)
from trajclass.labels import Label
from trajclass.processes import Brownian, DriftBrownian, Trajectory, simulate_paths


def _random_traj(rng, n=25, dt=0.3):
    return Trajectory(np.cumsum(rng.standard_normal((n + 1, 2)), axis=0), dt=dt)


class TestSigma:
    def test_sigma1_matches_loop(self, rng):
        t = _random_traj(rng)
        _, ref = t_stat_loop(t.positions.tolist(), t.dt, "first")
        assert sigma1(t).value ** 2 == pytest.approx(ref, rel=1e-12)

    def test_sigma2_matches_loop(self, rng):
        t = _random_traj(rng)
        _, ref = t_stat_loop(t.positions.tolist(), t.dt, "second")
        assert sigma2(t).value ** 2 == pytest.approx(ref, rel=1e-12)

    def test_sigma2_ignores_constant_drift(self):
        t = Trajectory(np.outer(np.arange(10), [0.5, -1.0]))
        assert sigma2(t).value == 0.0
        assert sigma1(t).value > 0.0

    def test_hand_computed(self):
        # Increments (1,0),(0,1): sum of squares 2 over 2*2*1 -> 0.5.
        t = Trajectory([[0, 0], [1, 0], [1, 1]])
        assert sigma1(t).value ** 2 == pytest.approx(0.5)
        # One second difference (-1, 1): 2 / (2*2*1).
        assert sigma2(t).value ** 2 == pytest.approx(0.5)

    def test_short_tracks(self):
        with pytest.raises(InsufficientDataError):
            sigma1(Trajectory([[0, 0]]))
        with pytest.raises(InsufficientDataError):
            sigma2(Trajectory([[0, 0], [1, 1]]))

    def test_method_coercion(self, rng):
        t = _random_traj(rng)
        assert estimate_sigma(t, "sigma2").method is SigmaMethod.SECOND_DIFF
        assert estimate_sigma(t, "first-diff").method is SigmaMethod.FIRST_DIFF
        with pytest.raises(ParameterError):
            estimate_sigma(t, "third")

    def test_unbiased_for_brownian(self):
        p = simulate_paths(Brownian(1.7), 30, 20_000, dt=0.2, rng=1)
        from trajclass.estimators import sigma1_sq_batch, sigma2_sq_batch

        assert sigma1_sq_batch(p, 0.2).mean() == pytest.approx(1.7**2, rel=0.01)
        # Second differences of Brownian increments have variance 2 sigma^2 dt per axis,
        # over n-1 terms: E = (n-1)/n * 2 sigma^2.
        assert sigma2_sq_batch(p, 0.2).mean() == pytest.approx(29 / 30 * 2 * 1.7**2, rel=0.01)


    @pytest.mark.parametrize("hurst", [0.13, 0.85])
    def test_fbm_limit_unbiased(self, hurst):
        # E[sigma1^2] = sigma^2 dt^{2h-1} exactly. Over 400 replicates at n=2000 the standard
        # error is about 0.15% for h=0.13 and 0.55% for h=0.85 (long memory); 2.5% is over 4 of them.
        from trajclass.estimators import sigma1_sq_batch
        from trajclass.processes import FractionalBrownian

        p = simulate_paths(FractionalBrownian(1.0, hurst), 2000, 400, dt=0.5, rng=12)
        assert sigma1_sq_batch(p, 0.5).mean() == pytest.approx(0.5 ** (2 * hurst - 1), rel=0.025)


class TestMsdCurve:
    def test_matches_loop(self, rng):
        t = _random_traj(rng, n=15)
        curve = msd_curve(t, 15)
        ref = [msd_loop(t.positions.tolist(), j) for j in range(1, 16)]
        np.testing.assert_allclose(curve.values, ref, rtol=1e-12)
        np.testing.assert_allclose(curve.times, t.dt * np.arange(1, 16))

    @pytest.mark.parametrize("lag", [0, 16])
    def test_lag_range(self, rng, lag):
        with pytest.raises(ParameterError):
            msd_curve(_random_traj(rng, n=15), lag)

    def test_loglog_slope_of_power_law(self):
        lags = np.arange(1, 9)
        for beta in (0.4, 1.0, 1.8):
            assert loglog_slope_batch(3.0 * (0.5 * lags) ** beta, 0.5) == pytest.approx(beta)


class TestMsdClassify:
    def test_straight_line_is_superdiffusive(self):
        t = Trajectory(np.outer(np.arange(31), [1.0, 1.0]) + np.array([[0.0, 0.0]]))
        res = msd_classify(t, immobile_radius=0.5)
        assert res.beta_hat == pytest.approx(2.0)
        assert res.label is Label.SUPERDIFFUSION

    def test_radius_rule(self, rng):
        t = _random_traj(rng)
        assert msd_classify(t, immobile_radius=1e9).label is Label.NOT_MOVING

    def test_motionless_is_degenerate(self):
        with pytest.raises(DegenerateTrajectoryError):
            msd_classify(Trajectory(np.ones((12, 2))), immobile_radius=0.0)

    def test_bad_fit_lags(self, rng):
        t = _random_traj(rng, n=10)
        with pytest.raises(ParameterError):
            msd_classify(t, fit_lags=1)
        with pytest.raises(ParameterError):
            msd_classify(t, fit_lags=11)

    def test_default_lags(self):
        assert default_fit_lags(30) == 15 and default_fit_lags(3) == 2

    def test_thresholds(self):
        k = np.arange(31.0)
        # Bounded circular motion: the MSD saturates, so the fitted exponent is small.
        t = Trajectory(np.column_stack([np.cos(k), np.sin(k)]))
        assert msd_classify(t, immobile_radius=0.0, beta_low=0.9).label is Label.SUBDIFFUSION
        assert msd_classify(t, immobile_radius=0.0, beta_low=-1.0, beta_high=-0.5).label is Label.SUPERDIFFUSION

    def test_batch_agrees_with_scalar(self):
        paths = np.concatenate([
            simulate_paths(Brownian(1.0), 30, 40, rng=2),
            simulate_paths(DriftBrownian.diagonal(1.0), 30, 40, rng=3),
        ])
        beta, codes = msd_classify_batch(paths)
        for p, b, c in zip(paths, beta, codes):
            res = msd_classify(Trajectory(p))
            assert res.label is MSD_CODES[c]
            if res.label is not Label.NOT_MOVING:
                assert res.beta_hat == pytest.approx(b)
