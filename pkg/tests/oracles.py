"""Independent reference implementations used only to check the samplers.

Everything here is deliberately written the slow, textbook way (Kalman
recursions, dense linear algebra, particle filtering) so it shares no code
with the fast paths it validates.
"""
from __future__ import annotations

import numpy as np


def ffbs_draw(ystar, obs_var, mu, phi, sigma, p0_var, rng, size=1):
    """Forward-filtering backward-sampling for the linearized model.

    State: h_0 ~ N(mu, p0_var); h_{t+1} = mu + phi (h_t - mu) + sigma eta.
    Observations: ystar_t ~ N(h_t, obs_var_t) for t = 1..n.
    Returns an array (size, n + 1) of joint draws of (h_0, ..., h_n).
    """
    n = len(ystar)
    sig2 = sigma**2
    # filtering; index 0 is h_0 (no observation)
    fm = np.empty(n + 1)
    fv = np.empty(n + 1)
    fm[0], fv[0] = mu, p0_var
    for t in range(1, n + 1):
        pm = mu + phi * (fm[t - 1] - mu)
        pv = phi**2 * fv[t - 1] + sig2
        k = pv / (pv + obs_var[t - 1])
        fm[t] = pm + k * (ystar[t - 1] - pm)
        fv[t] = (1.0 - k) * pv

    draws = np.empty((size, n + 1))
    draws[:, n] = fm[n] + np.sqrt(fv[n]) * rng.standard_normal(size)
    for t in range(n - 1, -1, -1):
        pv = phi**2 * fv[t] + sig2
        gain = phi * fv[t] / pv
        cond_mean = fm[t] + gain * (draws[:, t + 1] - (mu + phi * (fm[t] - mu)))
        cond_var = fv[t] - gain * phi * fv[t]
        draws[:, t] = cond_mean + np.sqrt(cond_var) * rng.standard_normal(size)
    return draws


def dense_tridiag_moments(diag, off, lin):
    """Exact mean and covariance of N(P^-1 lin, P^-1) by dense inversion."""
    n = len(diag)
    p = np.diag(np.asarray(diag, dtype=float))
    for i in range(n - 1):
        p[i, i + 1] = off[i]
        p[i + 1, i] = off[i]
    cov = np.linalg.inv(p)
    return cov @ np.asarray(lin, dtype=float), cov


def linearized_obs_moments():
    """Quadrature mean and variance of log chi-squared(1)."""
    from scipy import integrate

    def dens(x):
        return np.exp(0.5 * x - 0.5 * np.exp(x)) / np.sqrt(2.0 * np.pi)

    mean = integrate.quad(lambda x: x * dens(x), -60, 12, limit=500)[0]
    second = integrate.quad(lambda x: x * x * dens(x), -60, 12, limit=500)[0]
    return mean, second - mean**2


def log_chi2_cdf(x):
    """Exact CDF of log chi-squared(1)."""
    from scipy import special

    return special.gammainc(0.5, np.exp(np.asarray(x, dtype=float)) / 2.0)


def particle_filter_loglik(y, mu, phi, sigma, n_particles, rng, return_onestep=False):
    """Bootstrap particle filter for the vanilla zero-regression SV model.

    Returns the log-likelihood; with return_onestep also the per-time
    one-step-ahead log predictive densities log p(y_t | y_{1:t-1}).
    """
    n = len(y)
    h = mu + sigma / np.sqrt(1.0 - phi**2) * rng.standard_normal(n_particles)
    onestep = np.empty(n)
    for t in range(n):
        h = mu + phi * (h - mu) + sigma * rng.standard_normal(n_particles)
        logw = -0.5 * (np.log(2.0 * np.pi) + h + y[t] ** 2 * np.exp(-h))
        mx = logw.max()
        w = np.exp(logw - mx)
        onestep[t] = mx + np.log(w.mean())
        idx = rng.choice(n_particles, size=n_particles, p=w / w.sum())
        h = h[idx]
    if return_onestep:
        return float(onestep.sum()), onestep
    return float(onestep.sum())


def wls_solution(X, w, y):
    """Weighted least squares by explicit normal equations."""
    xw = X * w[:, None]
    return np.linalg.solve(X.T @ xw, xw.T @ y)
