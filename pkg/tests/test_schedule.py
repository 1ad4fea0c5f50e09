"""Schedule construction and the closed-form diffusion identities."""

import numpy as np
import pytest

from diffguide import (
    build_linear_schedule,
    forward_noising,
    posterior_mean,
    tweedie_x0,
)


def logspace_alpha_bar(beta):
    """Independent oracle: accumulate the product in log space."""
    return np.exp(np.cumsum(np.log1p(-beta)))


class TestBuildLinearSchedule:
    def test_default_study_schedule(self):
        """T=1000 with the standard range ends near 4.0e-5 and decreases."""
        sched = build_linear_schedule(1000, 1e-4, 0.02)
        assert sched.T == 1000
        assert sched.beta[1] == 1e-4 and sched.beta[1000] == 0.02
        oracle = logspace_alpha_bar(sched.beta[1:])
        np.testing.assert_allclose(sched.alpha_bar[1:], oracle, rtol=1e-12)
        assert abs(sched.alpha_bar[1000] - 4.0e-5) < 1e-6
        assert np.all(np.diff(sched.alpha_bar) < 0)

    def test_degenerate_zero_noise_limit(self):
        sched = build_linear_schedule(3, 1e-12, 1e-12)
        np.testing.assert_allclose(sched.alpha_bar[1:], 1.0, atol=1e-11)

    def test_hand_product(self):
        sched = build_linear_schedule(2, 0.1, 0.2)
        np.testing.assert_allclose(sched.alpha[1:], [0.9, 0.8], rtol=1e-15)
        np.testing.assert_allclose(sched.alpha_bar[1:], [0.9, 0.72], rtol=1e-15)

    def test_sentinel_entry(self):
        sched = build_linear_schedule(5)
        assert sched.alpha_bar[0] == 1.0 and sched.beta[0] == 0.0

    @pytest.mark.parametrize(
        "T,lo,hi",
        [(0, 0.1, 0.2), (-3, 0.1, 0.2), (5, 0.0, 0.2), (5, 0.3, 0.2), (5, 0.1, 1.0)],
    )
    def test_rejects_bad_inputs(self, T, lo, hi):
        with pytest.raises(ValueError):
            build_linear_schedule(T, lo, hi)

    def test_consistency_recurrence(self):
        """alpha_bar[t] = alpha_bar[t-1] * alpha[t] to 1e-15 relative."""
        sched = build_linear_schedule(1000)
        lhs = sched.alpha_bar[1:]
        rhs = sched.alpha_bar[:-1] * sched.alpha[1:]
        np.testing.assert_allclose(lhs, rhs, rtol=1e-15)

    def test_alpha_matches_beta_exactly(self):
        sched = build_linear_schedule(100)
        assert np.all(sched.alpha == 1.0 - sched.beta)


class TestForwardNoising:
    def test_zero_beta_limit_returns_x0(self):
        sched = build_linear_schedule(3, 1e-15, 1e-15)
        x0 = np.array([2.5, -1.0])
        eps = np.array([0.7, -0.3])
        np.testing.assert_allclose(forward_noising(x0, 2, eps, sched), x0, atol=1e-6)

    def test_hand_value(self):
        # alpha_bar[2] = 0.72 from the (0.1, 0.2) schedule
        sched = build_linear_schedule(2, 0.1, 0.2)
        got = forward_noising([1.0, 0.0], 2, [1.0, 1.0], sched)
        expect = np.array([np.sqrt(0.72) + np.sqrt(0.28), np.sqrt(0.28)])
        np.testing.assert_allclose(got, expect, rtol=1e-15)
        np.testing.assert_allclose(got, [1.3777, 0.5292], atol=5e-5)

    def test_pure_scaling_with_zero_noise(self):
        sched = _schedule_with_alpha_bar(0.25)
        got = forward_noising([4.0, -4.0], sched.T, [0.0, 0.0], sched)
        np.testing.assert_allclose(got, [2.0, -2.0], rtol=1e-12)

    def test_rejects_out_of_range_t(self):
        sched = build_linear_schedule(10)
        for t in (0, 11, -1):
            with pytest.raises(ValueError):
                forward_noising([0.0, 0.0], t, [0.0, 0.0], sched)

    def test_array_t_matches_per_item(self):
        sched = build_linear_schedule(30)
        rng = np.random.default_rng(5)
        x0 = rng.normal(size=(4, 2))
        eps = rng.normal(size=(4, 2))
        t = np.array([1, 7, 15, 30])
        batched = forward_noising(x0, t, eps, sched)
        for i in range(4):
            np.testing.assert_array_equal(
                batched[i], forward_noising(x0[i], int(t[i]), eps[i], sched)
            )


def _schedule_with_alpha_bar(target):
    """Search a one-step schedule whose alpha_bar[1] equals the target."""
    return build_linear_schedule(1, 1.0 - target, 1.0 - target)


class TestPosteriorMean:
    def test_zero_beta_limit_is_identity(self):
        sched = build_linear_schedule(4, 1e-14, 1e-14)
        x = np.array([1.5, -2.0])
        np.testing.assert_allclose(posterior_mean(x, [0.3, 0.4], 3, sched), x, atol=1e-6)

    def test_hand_value(self):
        # alpha=0.8, alpha_bar=0.72 at t=2 of the (0.1, 0.2) schedule;
        # x_t is the exact forward-noised point from the companion example
        sched = build_linear_schedule(2, 0.1, 0.2)
        x_t = forward_noising([1.0, 0.0], 2, [1.0, 1.0], sched)
        got = posterior_mean(x_t, [1.0, 1.0], 2, sched)
        expect = (x_t - (0.2 / np.sqrt(0.28)) * np.array([1.0, 1.0])) / np.sqrt(0.8)
        np.testing.assert_allclose(got, expect, rtol=1e-15)
        np.testing.assert_allclose(got, [1.1177, 0.1690], atol=5e-5)

    def test_zero_eps_collapses_to_scaling(self):
        sched = build_linear_schedule(7)
        x = np.array([0.4, -0.9])
        got = posterior_mean(x, [0.0, 0.0], 5, sched)
        np.testing.assert_allclose(got, x / np.sqrt(sched.alpha[5]), rtol=1e-15)

    def test_out_of_range(self):
        sched = build_linear_schedule(7)
        with pytest.raises(ValueError):
            posterior_mean([0.0, 0.0], [0.0, 0.0], 8, sched)


class TestTweedie:
    def test_round_trip_inverts_forward_noising(self):
        """tweedie(forward(x0, t, e), e, t) == x0 to 1e-12 for all t."""
        sched = build_linear_schedule(1000)
        rng = np.random.default_rng(0)
        for t in [1, 2, 17, 250, 500, 999, 1000]:
            x0 = rng.normal(scale=5.0, size=2)
            eps = rng.normal(size=2)
            back = tweedie_x0(forward_noising(x0, t, eps, sched), eps, t, sched)
            np.testing.assert_allclose(back, x0, atol=1e-12, rtol=1e-12)

    def test_zero_eps(self):
        sched = _schedule_with_alpha_bar(0.25)
        got = tweedie_x0([1.0, 1.0], [0.0, 0.0], sched.T, sched)
        np.testing.assert_allclose(got, [2.0, 2.0], rtol=1e-12)

    def test_gaussian_prior_posterior_mean(self):
        """With the exact single-Gaussian predictor, the prediction equals
        the conditional mean from Gaussian conditioning."""
        from diffguide import IsotropicGaussianEps, predict_eps

        sched = build_linear_schedule(1000)
        mean = np.array([3.0, -2.0])
        s = 1.7
        model = IsotropicGaussianEps(mean=mean, sigma=s)
        rng = np.random.default_rng(3)
        for t in [1, 50, 400, 1000]:
            x_t = rng.normal(scale=3.0, size=2)
            got = tweedie_x0(x_t, predict_eps(model, x_t, t, sched), t, sched)
            ab = sched.alpha_bar[t]
            gain = np.sqrt(ab) * s**2 / (ab * s**2 + 1.0 - ab)
            expect = mean + gain * (x_t - np.sqrt(ab) * mean)
            np.testing.assert_allclose(got, expect, atol=1e-12)

    def test_parameterizations_agree(self):
        """The reverse-step mean from the noise form equals the one computed
        through the predicted endpoint (posterior-mean identity)."""
        sched = build_linear_schedule(200)
        rng = np.random.default_rng(11)
        for _ in range(25):
            t = int(rng.integers(1, 201))
            x_t = rng.normal(scale=4.0, size=2)
            eps_hat = rng.normal(size=2)
            mu_eps = posterior_mean(x_t, eps_hat, t, sched)
            x0_hat = tweedie_x0(x_t, eps_hat, t, sched)
            a, ab = sched.alpha[t], sched.alpha_bar[t]
            ab_prev = sched.alpha_bar[t - 1]
            beta = sched.beta[t]
            mu_x0 = (
                np.sqrt(ab_prev) * beta / (1.0 - ab) * x0_hat
                + np.sqrt(a) * (1.0 - ab_prev) / (1.0 - ab) * x_t
            )
            np.testing.assert_allclose(mu_eps, mu_x0, atol=1e-12, rtol=1e-12)
