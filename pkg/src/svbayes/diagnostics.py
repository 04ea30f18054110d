"""Chain summaries, effective sample size, and sampler validation.

The validation harness runs the successive-conditional simulator: starting
from a prior draw of the full state it alternates "data given state" and
"state given data via one MCMC sweep".  At stationarity every parameter's
marginal law equals its prior, so mapping the thinned draws through the
prior CDF and the normal quantile function must produce standard normal
samples, which a normality test can check.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special, stats

from .distributions import Constant, Exponential, Infinity, Normal, RngStream
from .mixture import mixture_table
from .priors import PriorSpec, default_priors, has_leverage, has_t_errors, validate
from .univariate import (
    LatentPath,
    SvConfig,
    SvDraws,
    SvParams,
    _init_state,
    simulate_sv,
    simulate_y_given_state,
    sweep_fast,
    sweep_general,
)

__all__ = [
    "effective_sample_size",
    "SummaryRow",
    "SummaryTable",
    "summarize",
    "normality_pvalue",
    "anderson_darling_pvalue",
    "GewekeResult",
    "geweke_validate",
]


def effective_sample_size(chain: np.ndarray) -> float:
    """M / (1 + 2 sum of autocorrelations), truncated by the initial positive
    sequence rule on pairwise sums.  A constant chain returns 0.0, which
    doubles as the degeneracy flag (a proper chain always has ESS > 0)."""
    x = np.asarray(chain, dtype=float)
    m = x.shape[0]
    if m < 2 or not np.all(np.isfinite(x)):
        raise ValueError("chain must have length >= 2 and be finite")
    x = x - x.mean()
    var = float(x @ x) / m
    if var == 0.0:
        return 0.0
    nfft = 1 << (2 * m - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:m].real / m
    rho = acov / acov[0]
    # Geyer: sum rho in consecutive pairs while the pair sums stay positive
    tau = -1.0
    k = 0
    while 2 * k + 1 < m:
        pair = rho[2 * k] + rho[2 * k + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        k += 1
    tau = max(tau, 1.0 / m)
    return float(m / tau)


@dataclass
class SummaryRow:
    name: str
    mean: float
    sd: float
    quantiles: dict[float, float]
    ess: float


@dataclass
class SummaryTable:
    rows: list[SummaryRow]
    kept: int

    def row(self, name: str) -> SummaryRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def names(self) -> list[str]:
        return [r.name for r in self.rows]

    def to_dict(self) -> dict:
        return {
            "kept": self.kept,
            "rows": [
                {
                    "name": r.name,
                    "mean": r.mean,
                    "sd": r.sd,
                    "quantiles": {str(q): v for q, v in r.quantiles.items()},
                    "ess": r.ess,
                }
                for r in self.rows
            ],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def to_text(self) -> str:
        qs = sorted({q for r in self.rows for q in r.quantiles})
        header = ["parameter", "mean", "sd"] + [f"{100 * q:g}%" for q in qs] + ["ESS"]
        lines = [header]
        for r in self.rows:
            lines.append(
                [r.name, f"{r.mean:.4g}", f"{r.sd:.4g}"]
                + [f"{r.quantiles[q]:.4g}" for q in qs]
                + [f"{r.ess:.0f}"]
            )
        widths = [max(len(row[i]) for row in lines) for i in range(len(header))]
        return "\n".join(" ".join(c.rjust(w) for c, w in zip(row, widths)) for row in lines)


def _summary_row(name: str, draws: np.ndarray, quantiles) -> SummaryRow:
    qs = {float(q): float(np.quantile(draws, q)) for q in quantiles}
    sd = float(np.std(draws, ddof=1)) if draws.shape[0] > 1 else 0.0
    ess = effective_sample_size(draws) if draws.shape[0] > 1 else 0.0
    return SummaryRow(name, float(np.mean(draws)), sd, qs, ess)


def summarize(draws: SvDraws, quantiles=(0.05, 0.5, 0.95), showlatent: bool = False) -> SummaryTable:
    """Posterior summary of the parameters plus the derived exp(mu/2) and
    sigma^2 rows; latent rows are appended when requested."""
    if draws.kept == 0:
        raise ValueError("no stored draws")
    rows = [
        _summary_row("mu", draws.mu, quantiles),
        _summary_row("phi", draws.phi, quantiles),
        _summary_row("sigma", draws.sigma, quantiles),
    ]
    if draws.rho is not None:
        rows.append(_summary_row("rho", draws.rho, quantiles))
    if draws.nu is not None:
        rows.append(_summary_row("nu", draws.nu, quantiles))
    rows.append(_summary_row("exp(mu/2)", np.exp(draws.mu / 2.0), quantiles))
    rows.append(_summary_row("sigma^2", draws.sigma**2, quantiles))
    if draws.beta is not None:
        for i in range(draws.beta.shape[1]):
            rows.append(_summary_row(f"beta_{i}", draws.beta[:, i], quantiles))
    if showlatent:
        width = draws.latent.shape[1]
        offsets = range(width) if width > 1 else [draws.n - 1]
        rows.append(_summary_row("h_0", draws.latent0, quantiles))
        for col, t in enumerate(offsets):
            rows.append(_summary_row(f"h_{t + 1}", draws.latent[:, col], quantiles))
    return SummaryTable(rows=rows, kept=draws.kept)


# ---------------------------------------------------------------------------
# normality tests


def anderson_darling_pvalue(x: np.ndarray) -> float:
    """Anderson-Darling test of normality with estimated mean and variance.

    Uses the case-4 small-sample correction and the standard piecewise
    exponential p-value approximation for the corrected statistic.
    """
    x = np.sort(np.asarray(x, dtype=float))
    n = x.shape[0]
    if n < 8:
        raise ValueError("need at least 8 observations")
    mu = x.mean()
    sd = x.std(ddof=1)
    if sd == 0:
        return 0.0
    z = (x - mu) / sd
    logcdf = special.log_ndtr(z)
    logsf = special.log_ndtr(-z)
    i = np.arange(1, n + 1)
    a2 = -n - np.mean((2 * i - 1) * (logcdf + logsf[::-1]))
    a2 *= 1.0 + 0.75 / n + 2.25 / n**2
    if a2 >= 0.6:
        p = math.exp(1.2937 - 5.709 * a2 + 0.0186 * a2 * a2)
    elif a2 >= 0.34:
        p = math.exp(0.9177 - 4.279 * a2 - 1.38 * a2 * a2)
    elif a2 >= 0.2:
        p = 1.0 - math.exp(-8.318 + 42.796 * a2 - 59.938 * a2 * a2)
    else:
        p = 1.0 - math.exp(-13.436 + 101.14 * a2 - 223.73 * a2 * a2)
    return min(max(p, 0.0), 1.0)


def normality_pvalue(x: np.ndarray) -> float:
    """Shapiro-Wilk for n <= 5000, Anderson-Darling beyond that.

    Degenerate (constant) samples return 0.0: a flat chain can never be a
    standard normal sample.
    """
    x = np.asarray(x, dtype=float)
    if np.ptp(x) == 0.0:
        return 0.0
    if x.shape[0] <= 5000:
        return float(stats.shapiro(x).pvalue)
    return anderson_darling_pvalue(x)


# ---------------------------------------------------------------------------
# Geweke successive-conditional validation


@dataclass
class GewekeParamResult:
    name: str
    pvalue: float
    passed: bool
    transformed: np.ndarray | None = None


@dataclass
class GewekeResult:
    model_kind: str
    n_data: int
    kept: int
    thin: int
    alpha: float
    params: list[GewekeParamResult]

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.params)

    def pvalues(self) -> dict[str, float]:
        return {p.name: p.pvalue for p in self.params}

    def to_dict(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "n_data": self.n_data,
            "kept": self.kept,
            "thin": self.thin,
            "alpha": self.alpha,
            "passed": self.passed,
            "params": [
                {"name": p.name, "pvalue": p.pvalue, "passed": p.passed} for p in self.params
            ],
        }


def _prior_cdf(name: str, dist, values: np.ndarray) -> np.ndarray:
    if isinstance(dist, Exponential) and name == "nu":
        return dist.cdf(values - 2.0)
    return dist.cdf(values)


def _draw_prior_state(model_kind, priors, n, rng):
    mu = priors.mu.draw(rng) if not isinstance(priors.mu, Constant) else priors.mu.value
    phi = priors.phi.draw(rng)
    while (priors.latent0_variance == "stationary") and not abs(phi) < 1:
        phi = priors.phi.draw(rng)
    sigma2 = priors.sigma2.draw(rng)
    nu = math.inf
    if isinstance(priors.nu, Exponential):
        nu = 2.0 + priors.nu.draw(rng)
    elif isinstance(priors.nu, Constant):
        nu = priors.nu.value
    rho = priors.rho.draw(rng)
    params = SvParams(float(mu), float(phi), float(math.sqrt(sigma2)), float(nu), float(rho), np.empty(0))
    _, h0, h, tau = simulate_sv(model_kind, params, n, None, rng, priors.latent0_variance)
    return params, LatentPath(h0, h), tau


def geweke_validate(
    model_kind: str,
    priors: PriorSpec | None = None,
    n_data: int = 20,
    kept: int = 10000,
    thin: int = 50,
    alpha: float = 0.01,
    seed: int = 1,
    mutation: str | None = None,
    keep_samples: bool = False,
) -> GewekeResult:
    """Run the successive-conditional simulator and test each parameter.

    ``mutation`` deliberately breaks the sampler (currently "skip_sigma")
    so the harness's power can be demonstrated.  Requires proper priors.
    """
    priors = priors if priors is not None else default_priors(model_kind)
    priors = validate(priors, model_kind)
    for name in ("mu", "phi", "sigma2"):
        dist = getattr(priors, name)
        if isinstance(dist, Normal) and not dist.sd < math.inf:
            raise ValueError(f"flat prior on {name}")
    skip = frozenset()
    if mutation == "skip_sigma":
        skip = frozenset({"sigma"})
    elif mutation is not None:
        raise ValueError(f"unknown mutation {mutation!r}")

    rng = RngStream(seed, 0).generator()
    table = mixture_table("leverage" if has_leverage(model_kind) else "no_leverage")
    leverage = has_leverage(model_kind)

    params, latent, tau = _draw_prior_state(model_kind, priors, n_data, rng)
    state = _init_state(np.ones(n_data), None, model_kind, priors, 1e-8)
    state.mu, state.phi, state.sigma = params.mu, params.phi, params.sigma
    state.nu, state.rho = params.nu, params.rho
    state.h0, state.h, state.tau = latent.h0, latent.h, tau

    tracked = [("mu", priors.mu), ("phi", priors.phi), ("sigma", priors.sigma2)]
    if has_t_errors(model_kind) and isinstance(priors.nu, Exponential):
        tracked.append(("nu", priors.nu))
    if leverage and not isinstance(priors.rho, Constant):
        tracked.append(("rho", priors.rho))
    tracked = [(nm, d) for nm, d in tracked if not isinstance(d, (Constant, Infinity))]

    samples = {nm: np.empty(kept) for nm, _ in tracked}
    for i in range(kept * thin):
        y = simulate_y_given_state(model_kind, state.params(), LatentPath(state.h0, state.h), state.tau, None, rng)
        if leverage:
            sweep_general(state, y, None, table, priors, model_kind, rng, 1e-8, False, skip)
        else:
            sweep_fast(state, y, None, table, priors, model_kind, rng, 1e-8, False, skip)
        if (i + 1) % thin == 0:
            j = (i + 1) // thin - 1
            for nm, _ in tracked:
                val = getattr(state, nm)
                samples[nm][j] = val * val if nm == "sigma" else val

    results = []
    for nm, dist in tracked:
        u = np.asarray(_prior_cdf(nm, dist, samples[nm]), dtype=float)
        u = np.clip(u, 1e-14, 1.0 - 1e-14)
        z = special.ndtri(u)
        p = normality_pvalue(z)
        results.append(
            GewekeParamResult(nm, p, p >= alpha, transformed=z if keep_samples else None)
        )
    return GewekeResult(model_kind, n_data, kept, thin, alpha, results)
