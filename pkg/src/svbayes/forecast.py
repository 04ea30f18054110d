"""Posterior-predictive simulation, predictive likelihood, and rolling windows.

Every stored parameter draw spawns one simulated future path; predictive
quantiles are empirical quantiles over draws and the predictive likelihood
is the Monte Carlo average of the conditional density of the observed value
given each draw's simulated latent path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special, stats

from .distributions import RngStream
from .priors import PriorSpec, has_leverage, has_t_errors
from .univariate import SvConfig, SvDraws, resolve_config, run_sampler

__all__ = [
    "PredictiveDraws",
    "predict",
    "predictive_likelihood",
    "predictive_log_likelihood",
    "predictive_quantile",
    "WindowResult",
    "RollingResult",
    "rolling_estimate",
]

_PREDICT_STREAM = 1 << 20  # stream id offset reserved for predictive rng


@dataclass
class PredictiveDraws:
    h_future: np.ndarray  # (draws, n_ahead)
    y_future: np.ndarray  # (draws, n_ahead)
    mean_future: np.ndarray  # (draws, n_ahead) conditional observation means


def _default_rng(draws: SvDraws, offset: int = 0):
    return RngStream(draws.config.seed, _PREDICT_STREAM + offset).generator()


def _forward(draws: SvDraws, n_ahead: int, newdata, rng) -> PredictiveDraws:
    """Simulate future latent states and observations for every stored draw."""
    m = draws.kept
    mu, phi, sigma = draws.mu, draws.phi, draws.sigma
    leverage = draws.rho is not None
    t_errors = draws.nu is not None
    rho = draws.rho if leverage else None
    k = draws.k_regressors

    ar_type = draws.designmatrix is not None and draws.designmatrix != "matrix"
    lags = None
    x_rows = None
    if k > 0:
        if ar_type:
            p = draws.ar_order
            if p > 0:
                lags = np.tile(draws.y[-p:][::-1], (m, 1))  # (m, p): lag1, lag2, ...
        else:
            x_rows = np.asarray(newdata, dtype=float) if newdata is not None else None
            if x_rows is None:
                raise ValueError("newdata is required when the model has regressors")
            if x_rows.ndim != 2 or x_rows.shape != (n_ahead, k):
                raise ValueError(f"newdata must have shape ({n_ahead}, {k})")

    h = draws.latent_last.copy()
    if leverage:
        if k > 0:
            if ar_type:
                xb_last = draws.beta @ np.concatenate(
                    ([1.0], draws.y[len(draws.y) - draws.ar_order - 1 : -1][::-1])
                )
            else:
                xb_last = draws.beta @ draws.X[-1]
        else:
            xb_last = 0.0
        tau_last = draws.tau_last if t_errors else 1.0
        eps_prev = (draws.y[-1] - xb_last) * np.exp(-h / 2.0) / np.sqrt(tau_last)
    else:
        eps_prev = None

    h_fut = np.empty((m, n_ahead))
    y_fut = np.empty((m, n_ahead))
    mean_fut = np.empty((m, n_ahead))
    for j in range(n_ahead):
        z = rng.standard_normal(m)
        if leverage:
            h = mu + phi * (h - mu) + sigma * (rho * eps_prev + np.sqrt(1.0 - rho**2) * z)
        else:
            h = mu + phi * (h - mu) + sigma * z
        h_fut[:, j] = h
        if k == 0:
            mean_j = np.zeros(m)
        elif ar_type:
            mean_j = draws.beta[:, 0].copy()
            if lags is not None:
                mean_j += np.sum(draws.beta[:, 1:] * lags, axis=1)
        else:
            mean_j = draws.beta @ x_rows[j]
        mean_fut[:, j] = mean_j
        eps = rng.standard_normal(m)
        scale = np.exp(h / 2.0)
        if t_errors:
            tau = (draws.nu / 2.0) / rng.gamma(draws.nu / 2.0, 1.0)
            scale = scale * np.sqrt(tau)
        y_j = mean_j + scale * eps
        y_fut[:, j] = y_j
        if lags is not None:
            lags = np.column_stack([y_j, lags[:, :-1]]) if lags.shape[1] > 1 else y_j[:, None]
        eps_prev = eps
    return PredictiveDraws(h_fut, y_fut, mean_fut)


def predict(draws: SvDraws, n_ahead: int, newdata=None, rng=None) -> PredictiveDraws:
    """Posterior-predictive draws of (h, y) for 1..n_ahead steps ahead.

    AR design matrices feed simulated observations back into the lags;
    exogenous designs require ``newdata`` with one row per step.
    """
    if n_ahead < 1:
        raise ValueError("n_ahead must be >= 1")
    rng = rng if rng is not None else _default_rng(draws)
    return _forward(draws, n_ahead, newdata, rng)


def _log_terms(draws: SvDraws, x: float, n_ahead: int, newdata, rng) -> np.ndarray:
    sim = _forward(draws, n_ahead, newdata, rng)
    h = sim.h_future[:, -1]
    mean = sim.mean_future[:, -1]
    scale = np.exp(h / 2.0)
    resid = (x - mean) / scale
    if draws.nu is not None:
        return stats.t.logpdf(resid, df=draws.nu) - h / 2.0
    return -0.5 * resid * resid - h / 2.0 - 0.5 * math.log(2.0 * math.pi)


def predictive_likelihood(draws: SvDraws, x: float, n_ahead: int = 1, newdata=None, rng=None) -> float:
    """Monte Carlo one-value predictive density (1/M) sum_m p(x | kappa_m)."""
    rng = rng if rng is not None else _default_rng(draws)
    terms = _log_terms(draws, x, n_ahead, newdata, rng)
    return float(np.mean(np.exp(terms)))


def predictive_log_likelihood(
    draws: SvDraws, x: float, n_ahead: int = 1, newdata=None, rng=None
) -> float:
    """log of the predictive likelihood via a stable log-sum-exp."""
    rng = rng if rng is not None else _default_rng(draws)
    terms = _log_terms(draws, x, n_ahead, newdata, rng)
    return float(special.logsumexp(terms) - math.log(terms.shape[0]))


def predictive_quantile(draws: SvDraws, q, n_ahead: int = 1, newdata=None, rng=None) -> np.ndarray:
    """Empirical predictive quantiles, shape (n_ahead, len(q)).

    Uses the linear-interpolation (type 7) estimator so repeated runs with
    the same seed are bit-reproducible.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if np.any((q <= 0) | (q >= 1)):
        raise ValueError("quantiles must lie in (0, 1)")
    rng = rng if rng is not None else _default_rng(draws)
    sim = _forward(draws, n_ahead, newdata, rng)
    return np.quantile(sim.y_future, q, axis=0).T


# ---------------------------------------------------------------------------
# rolling-window backtesting


@dataclass
class WindowResult:
    index: int  # 1-based window number j
    start: int  # 1-based first observation of the fit window
    end: int  # 1-based last observation of the fit window
    scored_index: int  # 1-based index of the evaluated observation
    observed: float
    quantiles: dict[float, float] | None
    predictive_likelihood: float | None
    log_predictive_likelihood: float | None
    draws: SvDraws


@dataclass
class RollingResult:
    windows: list[WindowResult]
    n_ahead: int
    refit_window: str
    window_width: int

    def __len__(self) -> int:
        return len(self.windows)


def rolling_estimate(
    y,
    model_kind: str = "sv",
    n_ahead: int = 1,
    forecast_length: int = 30,
    refit_window: str = "moving",
    quantiles=(0.01, 0.05),
    calculate_predictive_likelihood: bool = True,
    priors: PriorSpec | None = None,
    config: SvConfig | None = None,
) -> RollingResult:
    """Re-estimate the model over moving or expanding windows and score
    n_ahead-step-ahead predictions on the subsequent observations.

    With series length L and J = forecast_length, window j fits on
    y[j : t+j-1] (moving) or y[1 : t+j-1] (expanding), 1-based inclusive,
    where the first-window width is t = L - J - n_ahead + 1; it then
    evaluates the observation n_ahead steps past the window end.  Windows
    are cold-started and use independent streams, so they can be computed
    in any order.
    """
    y = np.asarray(y, dtype=float)
    if refit_window not in ("moving", "expanding"):
        raise ValueError('refit_window must be "moving" or "expanding"')
    big_l = y.shape[0]
    j_count = int(forecast_length)
    width = big_l - j_count - n_ahead + 1
    if width < 2:
        raise ValueError(
            f"series of length {big_l} is too short for forecast_length={j_count}, "
            f"n_ahead={n_ahead}"
        )
    cfg = resolve_config(config if config is not None else SvConfig(), model_kind)
    windows = []
    for j in range(1, j_count + 1):
        lo = (j - 1) if refit_window == "moving" else 0
        hi = width + j - 1  # exclusive, 0-based
        sub = y[lo:hi]
        wcfg = replace(cfg, stream_offset=cfg.stream_offset + j * max(cfg.chains, 1))
        draws = run_sampler(sub, None, model_kind, priors=priors, config=wcfg)
        scored = hi + n_ahead - 1  # 0-based
        observed = float(y[scored])
        rng = _default_rng(draws, offset=j)
        qrow = None
        if quantiles is not None and len(quantiles) > 0:
            qvals = predictive_quantile(draws, quantiles, n_ahead, rng=rng)[-1]
            qrow = {float(q): float(v) for q, v in zip(quantiles, qvals)}
        plik = logplik = None
        if calculate_predictive_likelihood:
            terms = _log_terms(draws, observed, n_ahead, None, _default_rng(draws, offset=j + (1 << 16)))
            plik = float(np.mean(np.exp(terms)))
            logplik = float(special.logsumexp(terms) - math.log(terms.shape[0]))
        windows.append(
            WindowResult(
                index=j,
                start=lo + 1,
                end=hi,
                scored_index=scored + 1,
                observed=observed,
                quantiles=qrow,
                predictive_likelihood=plik,
                log_predictive_likelihood=logplik,
                draws=draws,
            )
        )
    return RollingResult(windows=windows, n_ahead=n_ahead, refit_window=refit_window, window_width=width)
