import numpy as np
import pytest

from svbayes.distributions import Constant, RngStream
from svbayes.linalg import sample_tridiag_mvn, tridiag_solve
from svbayes.mixture import MixtureTable, mixture_table
from svbayes.univariate import SvParams, draw_latent_awol, draw_latent_leverage

from oracles import dense_tridiag_moments, ffbs_draw


def rng(seed=1):
    return RngStream(seed).generator()


def table_from_assignments(obs_var):
    """One mixture component per time point with mean 0, given variances."""
    n = len(obs_var)
    return (
        MixtureTable(np.full(n, 1.0 / n), np.zeros(n), np.asarray(obs_var, dtype=float)),
        np.arange(n),
    )


def test_tridiag_sampler_exact_moments():
    g = rng(3)
    diag = np.array([4.0, 5.0, 3.5, 6.0])
    off = np.array([-1.0, 0.7, -0.4])
    lin = np.array([1.0, -2.0, 0.3, 0.8])
    mean, cov = dense_tridiag_moments(diag, off, lin)
    z = g.standard_normal((4, 200_000))
    draws = sample_tridiag_mvn(diag, off, lin, z)
    np.testing.assert_allclose(draws.mean(axis=1), mean, atol=4 * np.sqrt(cov.max() / 200_000))
    np.testing.assert_allclose(np.cov(draws), cov, atol=0.02)
    np.testing.assert_allclose(tridiag_solve(diag, off, lin), mean, rtol=1e-12)


def test_tridiag_rejects_non_spd():
    with pytest.raises(ValueError):
        sample_tridiag_mvn(np.array([1.0, 1.0]), np.array([2.0]), np.zeros(2), np.zeros(2))


def test_awol_n1_phi0_closed_form():
    # with phi = 0 the posterior for h_1 has precision 1/v + 1/sigma^2 and a
    # precision-weighted mean of (ystar - m) and mu
    v, mu, sigma = 0.8, -1.5, 0.6
    tbl = MixtureTable(np.array([1.0]), np.array([0.4]), np.array([v]))
    params = SvParams(mu=mu, phi=0.0, sigma=sigma)
    ystar = np.array([2.0])
    g = rng(11)
    draws = np.array(
        [draw_latent_awol(ystar, np.zeros(1, int), params, tbl, g).h[0] for _ in range(200_000)]
    )
    prec = 1.0 / v + 1.0 / sigma**2
    want_mean = ((ystar[0] - 0.4) / v + mu / sigma**2) / prec
    assert draws.mean() == pytest.approx(want_mean, abs=4 * np.sqrt(1 / prec / 200_000))
    assert draws.var() == pytest.approx(1.0 / prec, rel=0.02)


def test_awol_prior_draw_matches_ar1_autocovariance():
    # infinite observation variance turns the draw into the AR(1) prior
    n = 5
    mu, phi, sigma = 0.7, 0.85, 0.5
    tbl = MixtureTable(np.array([1.0]), np.array([0.0]), np.array([np.inf]))
    params = SvParams(mu=mu, phi=phi, sigma=sigma)
    g = rng(13)
    reps = 100_000
    out = np.empty((reps, n))
    for r in range(reps):
        out[r] = draw_latent_awol(np.zeros(n), np.zeros(n, int), params, tbl, g).h
    gamma0 = sigma**2 / (1 - phi**2)
    emp = np.cov(out.T)
    want = gamma0 * phi ** np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    np.testing.assert_allclose(emp, want, atol=5 * gamma0 / np.sqrt(reps) * 4)
    np.testing.assert_allclose(out.mean(axis=0), np.full(n, mu), atol=4 * np.sqrt(gamma0 / reps))


@pytest.mark.parametrize("seed", [101, 202, 303])
def test_awol_matches_ffbs_oracle(seed):
    g = np.random.default_rng(seed)
    n = int(g.integers(2, 9))
    mu = float(g.normal(0, 1))
    phi = float(g.uniform(-0.9, 0.98))
    sigma = float(g.uniform(0.2, 1.2))
    obs_var = g.uniform(0.2, 5.0, size=n)
    ystar = mu + g.normal(0, 1, size=n)
    tbl, idx = table_from_assignments(obs_var)
    params = SvParams(mu=mu, phi=phi, sigma=sigma)

    reps = 100_000
    ga, gb = rng(seed), rng(seed + 1)
    awol = np.empty((reps, n + 1))
    for r in range(reps):
        lp = draw_latent_awol(ystar, idx, params, tbl, ga)
        awol[r, 0] = lp.h0
        awol[r, 1:] = lp.h
    p0 = sigma**2 / (1 - phi**2)
    ffbs = ffbs_draw(ystar, obs_var, mu, phi, sigma, p0, gb, size=reps)

    se_mean = np.sqrt(awol.var(axis=0) / reps) + np.sqrt(ffbs.var(axis=0) / reps)
    assert np.all(np.abs(awol.mean(axis=0) - ffbs.mean(axis=0)) <= 4 * se_mean)
    ca, cb = np.cov(awol.T), np.cov(ffbs.T)
    scale = np.sqrt(np.outer(np.diag(ca), np.diag(ca)))
    assert np.max(np.abs(ca - cb) / scale) < 4 * np.sqrt(2.0 / reps) * 4


def test_leverage_latent_reduces_to_awol_at_rho_zero():
    n = 6
    g = np.random.default_rng(5)
    ystar = g.normal(-1, 1, n)
    idx = g.integers(0, 10, n)
    d = np.where(g.normal(size=n) > 0, 1.0, -1.0)
    params = SvParams(mu=-0.5, phi=0.9, sigma=0.4, rho=0.0)
    tbl_l = mixture_table("leverage")
    tbl = mixture_table()
    reps = 60_000
    ga, gb = rng(21), rng(21)
    a = np.empty((reps, n + 1))
    b = np.empty((reps, n + 1))
    for r in range(reps):
        la = draw_latent_leverage(ystar, d, idx, params, tbl_l, ga)
        lb = draw_latent_awol(ystar, idx, params, tbl, gb)
        a[r] = np.concatenate(([la.h0], la.h))
        b[r] = np.concatenate(([lb.h0], lb.h))
    # same precision/linear system, same stream: identical draws
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-10)


def test_leverage_latent_moments_match_dense_oracle():
    # build the exact joint Gaussian implied by the coupled approximation and
    # compare moments against a dense computation
    n = 5
    g = np.random.default_rng(17)
    tbl = mixture_table("leverage")
    ystar = g.normal(-2, 2, n)
    idx = g.integers(0, 10, n)
    d = np.where(g.normal(size=n) > 0, 1.0, -1.0)
    mu, phi, sigma, rho = -0.8, 0.8, 0.5, -0.45
    params = SvParams(mu=mu, phi=phi, sigma=sigma, rho=rho)

    m = tbl.means[idx]
    v = tbl.variances[idx]
    big_a = tbl.coef_a[idx] * np.exp(m / 2)
    big_b = tbl.coef_b[idx] * np.exp(m / 2)
    sig2 = sigma**2
    q2 = sig2 * (1 - rho**2)
    p0 = sig2 / (1 - phi**2)

    diag = np.zeros(n + 1)
    off = np.zeros(n)
    lin = np.zeros(n + 1)
    diag[0] += 1 / p0 + phi**2 / sig2
    off[0] += -phi / sig2
    diag[1] += 1 / sig2
    lin[0] += mu / p0 - mu * (1 - phi) * phi / sig2
    lin[1] += mu * (1 - phi) / sig2
    diag[1:] += 1 / v
    lin[1:] += (ystar - m) / v
    for t in range(1, n):
        i = t - 1
        phis = phi - d[i] * rho * sigma * big_b[i]
        k = mu * (1 - phi) + d[i] * rho * sigma * (big_a[i] + big_b[i] * (ystar[i] - m[i]))
        diag[t] += phis**2 / q2
        diag[t + 1] += 1 / q2
        off[t] += -phis / q2
        lin[t] += -phis * k / q2
        lin[t + 1] += k / q2
    mean, cov = dense_tridiag_moments(diag, off, lin)

    reps = 150_000
    ga = rng(33)
    out = np.empty((reps, n + 1))
    for r in range(reps):
        lp = draw_latent_leverage(ystar, d, idx, params, tbl, ga)
        out[r] = np.concatenate(([lp.h0], lp.h))
    se = np.sqrt(np.diag(cov) / reps)
    assert np.all(np.abs(out.mean(axis=0) - mean) <= 4 * se)
    np.testing.assert_allclose(np.cov(out.T), cov, atol=4 * cov.max() * np.sqrt(2 / reps) * 2)
