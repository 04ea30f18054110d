import numpy as np
import pytest

from svbayes.distributions import RngStream
from svbayes.mixture import MixtureTable, OffsetUnderflowError, draw_indicators, mixture_table

from oracles import linearized_obs_moments, log_chi2_cdf


def rng(seed=1):
    return RngStream(seed).generator()


def test_probs_sum_to_one():
    t = mixture_table()
    assert abs(t.probs.sum() - 1.0) < 1e-12
    assert np.all(t.variances > 0)


def test_moments_match_quadrature():
    t = mixture_table()
    mean_exact, var_exact = linearized_obs_moments()
    mean = float(t.probs @ t.means)
    var = float(t.probs @ (t.variances + t.means**2)) - mean**2
    assert mean_exact == pytest.approx(-1.2704, abs=2e-4)
    assert var_exact == pytest.approx(4.9348, abs=2e-4)
    assert abs(mean - mean_exact) < 1e-3
    assert abs(var - var_exact) < 5e-3


def test_ks_distance_below_threshold():
    t = mixture_table()
    from scipy.special import ndtr

    grid = np.linspace(-25.0, 6.0, 4001)
    mix_cdf = np.zeros_like(grid)
    for p, m, v in zip(t.probs, t.means, t.variances):
        mix_cdf += p * ndtr((grid - m) / np.sqrt(v))
    assert np.max(np.abs(mix_cdf - log_chi2_cdf(grid))) < 0.01


def test_leverage_coupling_coefficients():
    t = mixture_table("leverage")
    # intercepts are E exp(z/2) for z ~ N(0, v); slopes are half that
    np.testing.assert_allclose(t.coef_a, np.exp(t.variances / 8.0), atol=5e-6)
    np.testing.assert_allclose(t.coef_b, t.coef_a / 2.0, atol=1e-5)
    assert mixture_table().coef_a is None


def test_single_component_table():
    t = MixtureTable(np.array([1.0]), np.array([-1.27]), np.array([4.93]))
    s = draw_indicators(np.zeros(50), np.zeros(50), t, rng())
    assert np.all(s == 0)


def test_degenerate_likelihood_selects_matching_component():
    t = MixtureTable(
        probs=np.array([0.5, 0.5]),
        means=np.array([0.0, 3.0]),
        variances=np.array([1e-12, 1e-12]),
    )
    ystar = np.array([3.0, 0.0, 3.0])
    h = np.zeros(3)
    s = draw_indicators(ystar, h, t, rng())
    np.testing.assert_array_equal(s, [1, 0, 1])


def test_indicator_frequencies_match_bruteforce():
    t = mixture_table()
    ystar = np.array([-1.1])
    h = np.array([0.4])
    reps = 1_000_000
    g = rng(5)
    s = draw_indicators(np.repeat(ystar, reps), np.repeat(h, reps), t, g)
    # brute-force normalization of the ten weights
    w = t.probs * np.exp(-0.5 * (ystar[0] - h[0] - t.means) ** 2 / t.variances) / np.sqrt(
        t.variances
    )
    w /= w.sum()
    freqs = np.bincount(s, minlength=10) / reps
    se = np.sqrt(w * (1 - w) / reps)
    assert np.all(np.abs(freqs - w) <= 4 * se + 1e-12)


def test_exchangeability_under_permutation():
    t = mixture_table()
    ystar = np.array([-3.0, 0.5, -1.0, 2.0])
    h = np.array([0.0, -1.0, 1.0, 0.5])
    perm = np.array([2, 0, 3, 1])
    reps = 40_000
    counts = np.zeros((4, 10))
    counts_p = np.zeros((4, 10))
    g1, g2 = rng(7), rng(8)
    for _ in range(reps // 1000):
        s = draw_indicators(np.tile(ystar, 1000), np.tile(h, 1000), t, g1)
        sp = draw_indicators(np.tile(ystar[perm], 1000), np.tile(h[perm], 1000), t, g2)
        for i in range(4):
            counts[i] += np.bincount(s[i::4], minlength=10)
            counts_p[i] += np.bincount(sp[i::4], minlength=10)
    f = counts / reps
    fp = counts_p[np.argsort(perm)] / reps
    assert np.max(np.abs(f - fp)) < 0.012


def test_nonfinite_ystar_raises():
    t = mixture_table()
    with pytest.raises(OffsetUnderflowError):
        draw_indicators(np.array([np.inf, 0.0]), np.zeros(2), t, rng())
