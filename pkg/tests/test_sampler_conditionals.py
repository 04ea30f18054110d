import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from svbayes.distributions import Constant, Exponential, Gamma, Infinity, MultivariateNormal, Normal, RngStream, TranslatedBeta
from svbayes.mixture import mixture_table
from svbayes.priors import default_priors
from svbayes.univariate import (
    LatentPath,
    SvConfig,
    SvParams,
    build_design,
    draw_beta,
    draw_nu,
    draw_sv_params_asis,
    draw_tail_latents,
    init_start_values,
    MhStep,
    run_sampler,
    simulate_sv,
)

from oracles import wls_solution


def rng(seed=1):
    return RngStream(seed).generator()


# ---------------------------------------------------------------- start values


def test_init_ols_intercept_only():
    y = np.full(10, 3.7)
    X = np.ones((10, 1))
    params, latent = init_start_values(y, X, default_priors("sv"))
    assert params.beta[0] == pytest.approx(3.7)
    assert np.all(latent.h == latent.h[0])


def test_init_mu_flat_prior_limit():
    y = np.exp(np.linspace(-2, 1, 50))
    pri = replace(default_priors("sv"), mu=Normal(0.0, 1e8))
    params, _ = init_start_values(y, None, pri)
    want = np.mean(np.log(y**2)) + 1.27
    assert params.mu == pytest.approx(want, abs=1e-3)


def test_init_phi_prior_mean():
    params, _ = init_start_values(np.ones(5), None, default_priors("sv"))
    assert params.phi == pytest.approx(2 * (5 / 6.5) - 1, abs=1e-12)


def test_init_nu_rho_prior_means():
    params, _ = init_start_values(np.ones(5), None, default_priors("svtl"))
    assert params.nu == pytest.approx(12.0)  # 2 + 1/0.1
    assert params.rho == pytest.approx(0.0)


def test_init_rank_deficient_raises():
    X = np.column_stack([np.ones(6), np.ones(6)])
    with pytest.raises(ValueError, match="rank"):
        init_start_values(np.arange(6.0), X, default_priors("sv"))
    with pytest.raises(ValueError, match="empty"):
        init_start_values(np.empty(0), None, default_priors("sv"))


def test_build_design_ar():
    y = np.arange(10.0)
    y2, X, rec, p = build_design(y, "ar2")
    assert p == 2 and rec == "ar2"
    assert y2.shape == (8,) and X.shape == (8, 3)
    np.testing.assert_allclose(X[:, 0], 1.0)
    np.testing.assert_allclose(X[:, 1], y[1:9])  # lag 1
    np.testing.assert_allclose(X[:, 2], y[0:8])  # lag 2
    with pytest.raises(ValueError):
        build_design(np.arange(5.0), "ar2")  # needs 2p + 2 = 6


# ------------------------------------------------------------- mu conditional


def test_mu_centered_conditional_matches_closed_form():
    # fix phi and sigma, run only the centered leg from a frozen path, and
    # compare the mu draws against the analytic normal conditional
    g = rng(5)
    n = 60
    phi, sigma = 0.8, 0.5
    h0 = 0.3
    h = np.cumsum(g.normal(0, 0.3, n)) + 0.3
    pri = replace(
        default_priors("sv"),
        mu=Normal(0.5, 2.0),
        phi=Constant(phi),
        sigma2=Constant(sigma**2),
    )
    params = SvParams(mu=0.0, phi=phi, sigma=sigma)
    tbl = mixture_table()
    ystar = h + g.normal(0, 1, n)
    s = np.full(n, 4)

    lag = np.concatenate(([h0], h[:-1]))
    prec = (1 - phi**2) / sigma**2 + n * (1 - phi) ** 2 / sigma**2 + 1 / 4.0
    lin = (
        (1 - phi**2) * h0 / sigma**2
        + (1 - phi) * np.sum(h - phi * lag) / sigma**2
        + 0.5 / 4.0
    )
    centered = np.empty(40_000)
    for i in range(centered.shape[0]):
        out, _ = draw_sv_params_asis(
            LatentPath(h0, h), ystar, s, params, pri, g, tbl, skip=frozenset({"noncentered"})
        )
        centered[i] = out.mu
    m = lin / prec
    sd = math.sqrt(1 / prec)
    assert stats.kstest(centered, stats.norm(m, sd).cdf).pvalue > 1e-3


def test_mu_sigma_constant_priors_are_respected():
    g = rng(7)
    y, _, _, _ = simulate_sv("sv", SvParams(-1.0, 0.9, 0.4), 200, None, g)
    pri = replace(default_priors("sv"), phi=Constant(0.99), sigma2=Constant(0.09), mu=Constant(-1.0))
    d = run_sampler(y, None, "sv", priors=pri, config=SvConfig(draws=50, burnin=10, seed=2))
    assert np.all(d.phi == 0.99)
    assert np.all(d.sigma == 0.3)
    assert np.all(d.mu == -1.0)


# ---------------------------------------------------------------- tau and nu


def test_tau_conditional_matches_inverse_gamma():
    g = rng(9)
    n = 50_000
    nu = 6.0
    h = np.full(n, -0.7)
    y = np.full(n, 0.4)
    params = SvParams(mu=0.0, phi=0.9, sigma=0.3, nu=nu)
    tau = draw_tail_latents(y, None, h, params, g)
    eps = 0.4 * math.exp(0.35)
    want = stats.invgamma((nu + 1) / 2, scale=(nu + eps**2) / 2)
    assert stats.kstest(tau, want.cdf).pvalue > 0.01


def test_tau_gaussian_limit_is_one():
    params = SvParams(mu=0.0, phi=0.9, sigma=0.3, nu=math.inf)
    tau = draw_tail_latents(np.ones(10), None, np.zeros(10), params, rng())
    np.testing.assert_array_equal(tau, 1.0)


def test_nu_mh_targets_conditional():
    # with many tau drawn at nu_true the conditional concentrates near nu_true
    g = rng(11)
    nu_true = 8.0
    tau = (nu_true / 2) / g.gamma(nu_true / 2, 1.0, size=5000)
    pri = default_priors("svt")
    step = MhStep(0.3)
    nu = 15.0
    chain = []
    for i in range(4000):
        nu = draw_nu(tau, pri, nu, g, step, adapting=i < 500)
        chain.append(nu)
    chain = np.asarray(chain[1000:])
    assert abs(np.mean(chain) - nu_true) < 1.0
    assert 0.05 < step.step < 5.0


# ---------------------------------------------------------------------- beta


def test_beta_flat_prior_limit_is_wls():
    g = rng(13)
    n, k = 400, 3
    X = np.column_stack([np.ones(n), g.normal(size=n), g.normal(size=n)])
    h = g.normal(-1, 0.5, n)
    tau = g.uniform(0.5, 2.0, n)
    y = X @ np.array([0.5, -1.0, 2.0]) + np.exp(h / 2) * np.sqrt(tau) * g.normal(size=n)
    pri = replace(
        default_priors("sv"), beta=MultivariateNormal.isotropic(0.0, 1e7, k)
    )
    params = SvParams(0.0, 0.9, 0.3, beta=np.zeros(k))
    draws = np.array([draw_beta(y, X, h, tau, params, pri, g) for _ in range(20_000)])
    w = np.exp(-h) / tau
    want = wls_solution(X, w, y)
    se = draws.std(axis=0) / math.sqrt(draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - want) < 5 * se)


def test_beta_scalar_conjugate_formula():
    g = rng(15)
    n = 30
    h_const = -0.4
    y = g.normal(2.0, 1.0, n)
    X = np.ones((n, 1))
    b0, B0 = 1.0, 0.25
    pri = replace(default_priors("sv"), beta=MultivariateNormal.isotropic(b0, math.sqrt(B0), 1))
    params = SvParams(0.0, 0.9, 0.3, beta=np.zeros(1))
    h = np.full(n, h_const)
    tau = np.ones(n)
    w = math.exp(-h_const)
    prec = n * w + 1 / B0
    mean = (n * w * y.mean() + b0 / B0) / prec
    draws = np.array([draw_beta(y, X, h, tau, params, pri, g)[0] for _ in range(30_000)])
    assert draws.mean() == pytest.approx(mean, abs=4 * math.sqrt(1 / prec / 30_000))
    assert draws.var() == pytest.approx(1 / prec, rel=0.05)


def test_beta_degenerate_prior_pins_value():
    g = rng(17)
    pri = replace(default_priors("sv"), beta=MultivariateNormal.isotropic(1.5, 1e-7, 1))
    params = SvParams(0.0, 0.9, 0.3, beta=np.zeros(1))
    out = draw_beta(np.zeros(8), np.ones((8, 1)), np.zeros(8), np.ones(8), params, pri, g)
    assert out[0] == pytest.approx(1.5, abs=1e-5)


# ----------------------------------------------------- stored-draw invariants


def test_stored_draw_ranges():
    g = rng(19)
    y, _, _, _ = simulate_sv("svt", SvParams(-1.0, 0.95, 0.3, nu=8.0), 300, None, g)
    d = run_sampler(y, None, "svt", config=SvConfig(draws=400, burnin=100, seed=5))
    assert np.all(np.abs(d.phi) < 1)
    assert np.all(d.sigma > 0)
    assert np.all(d.nu > 2)


def test_leverage_reduction_matches_fast_sampler_law():
    # svl with rho = Constant(0) must equal the vanilla sampler in law.  The
    # two samplers mix at different speeds, so compare posterior summaries
    # over replicated runs with a mean test that allows unequal variances.
    g = rng(23)
    y, _, _, _ = simulate_sv("sv", SvParams(-1.0, 0.9, 0.35), 150, None, g)
    pri_lev = replace(default_priors("svl"), rho=Constant(0.0))
    means_fast = []
    means_lev = []
    for rep in range(20):
        cfg = SvConfig(draws=600, burnin=300, seed=1000 + rep)
        df = run_sampler(y, None, "sv", config=cfg)
        dl = run_sampler(y, None, "svl", priors=pri_lev, config=replace(cfg, seed=5000 + rep))
        means_fast.append([df.mu.mean(), df.phi.mean(), df.sigma.mean()])
        means_lev.append([dl.mu.mean(), dl.phi.mean(), dl.sigma.mean()])
    means_fast = np.asarray(means_fast)
    means_lev = np.asarray(means_lev)
    for j in range(3):
        p = stats.ttest_ind(means_fast[:, j], means_lev[:, j], equal_var=False).pvalue
        assert p > 1e-3, (j, p)
