"""MCMC samplers for the univariate SV model family.

Four model kinds are supported: "sv" (Gaussian errors), "svt" (Student-t
errors), "svl" (Gaussian errors with leverage), and "svtl" (both).  All
share the latent AR(1) log-variance; observation equations may include a
linear regression part.

The no-leverage sampler linearizes the observation equation with the
log-chi-squared mixture, draws the whole latent path jointly from its
tridiagonal-precision Gaussian conditional, and updates (mu, phi, sigma)
twice per sweep: once in the centered and once in the noncentered
parameterization of the path (interweaving).  The leverage sampler keeps
the same latent machinery with the mixture's coupling coefficients and
moves (mu, phi, sigma, rho) against the exact joint density in both
parameterizations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy import signal

from .distributions import (
    Constant,
    Exponential,
    Gamma,
    Infinity,
    InverseGamma,
    MultivariateNormal,
    Normal,
    RngStream,
    TranslatedBeta,
)
from .linalg import sample_tridiag_mvn
from .mixture import MixtureTable, draw_indicators, mixture_table
from .priors import (
    PriorSpec,
    default_priors,
    expand_beta_prior,
    has_leverage,
    has_t_errors,
    validate,
)

__all__ = [
    "SvParams",
    "LatentPath",
    "SvConfig",
    "SvDraws",
    "SamplerError",
    "build_design",
    "init_start_values",
    "simulate_sv",
    "draw_latent_awol",
    "draw_sv_params_asis",
    "draw_tail_latents",
    "draw_nu",
    "draw_beta",
    "draw_latent_leverage",
    "draw_rho",
    "run_sampler",
    "default_config",
]


class SamplerError(RuntimeError):
    """A sweep failed; the message carries the sweep index."""


@dataclass
class SvParams:
    """One draw of the model parameters."""

    mu: float
    phi: float
    sigma: float
    nu: float = math.inf
    rho: float = 0.0
    beta: np.ndarray = field(default_factory=lambda: np.empty(0))


@dataclass
class LatentPath:
    h0: float
    h: np.ndarray


@dataclass
class SvConfig:
    """Sampler configuration; draws/burnin default per model kind."""

    draws: int | None = None
    burnin: int | None = None
    thinpara: int = 1
    thinlatent: int = 1
    keeptime: str = "all"  # "all" or "last"
    chains: int = 1
    seed: int = 1
    offset: float = 1e-8  # added inside log((y - x beta)^2 + offset)
    interweave: int = 1  # ASIS passes per sweep for the leverage sampler
    adapt: bool = True  # tune MH step sizes during burn-in
    stream_offset: int = 0  # chain i uses rng stream stream_offset + i


def default_config(model_kind: str, **overrides) -> SvConfig:
    cfg = SvConfig(**overrides)
    return resolve_config(cfg, model_kind)


def resolve_config(cfg: SvConfig, model_kind: str) -> SvConfig:
    draws = cfg.draws if cfg.draws is not None else (20000 if has_leverage(model_kind) else 10000)
    burnin = cfg.burnin if cfg.burnin is not None else (2000 if has_leverage(model_kind) else 1000)
    if cfg.keeptime not in ("all", "last"):
        raise ValueError('keeptime must be "all" or "last"')
    if cfg.thinpara < 1 or cfg.thinlatent < 1 or draws < 1 or burnin < 0:
        raise ValueError("invalid sampler configuration")
    return replace(cfg, draws=draws, burnin=burnin)


@dataclass
class SvDraws:
    """Stored chains plus the configuration and data they came from."""

    model_kind: str
    mu: np.ndarray
    phi: np.ndarray
    sigma: np.ndarray
    nu: np.ndarray | None
    rho: np.ndarray | None
    beta: np.ndarray | None
    latent0: np.ndarray
    latent: np.ndarray
    latent_last: np.ndarray
    tau_last: np.ndarray | None
    chain: np.ndarray
    priors: PriorSpec
    config: SvConfig
    y: np.ndarray
    X: np.ndarray | None
    designmatrix: str | None
    ar_order: int

    @property
    def kept(self) -> int:
        return self.mu.shape[0]

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def k_regressors(self) -> int:
        return 0 if self.X is None else self.X.shape[1]

    def parameter_names(self) -> list[str]:
        names = ["mu", "phi", "sigma"]
        if self.nu is not None:
            names.append("nu")
        if self.rho is not None:
            names.append("rho")
        names += [f"beta_{i}" for i in range(self.k_regressors)]
        return names

    def parameter_array(self) -> np.ndarray:
        cols = [self.mu, self.phi, self.sigma]
        if self.nu is not None:
            cols.append(self.nu)
        if self.rho is not None:
            cols.append(self.rho)
        if self.beta is not None:
            cols.extend(self.beta.T)
        return np.column_stack(cols)


# ---------------------------------------------------------------------------
# design matrix and start values


def build_design(y: np.ndarray, designmatrix) -> tuple[np.ndarray, np.ndarray | None, str | None, int]:
    """Expand the design specification.

    ``designmatrix`` is None (no regression part), "ar0"/"ar1"/... (intercept
    plus that many lags of y, consuming the first observations), or an
    explicit (n, K) matrix.  Returns (y, X, record, ar_order).
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("y must be one-dimensional")
    if designmatrix is None:
        return y, None, None, 0
    if isinstance(designmatrix, str):
        if not designmatrix.startswith("ar"):
            raise ValueError(f"unknown designmatrix {designmatrix!r}")
        p = int(designmatrix[2:])
        if len(y) < 2 * p + 2:
            raise ValueError(f"need at least {2 * p + 2} observations for {designmatrix!r}")
        cols = [np.ones(len(y) - p)]
        for lag in range(1, p + 1):
            cols.append(y[p - lag : len(y) - lag])
        return y[p:], np.column_stack(cols), designmatrix, p
    X = np.asarray(designmatrix, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("design matrix must be (n, K)")
    return y, X, "matrix", 0


def _start_sigma(prior_sigma2) -> float:
    """Prior mean of sigma implied by the prior on sigma^2."""
    if isinstance(prior_sigma2, Constant):
        return math.sqrt(prior_sigma2.value)
    if isinstance(prior_sigma2, Gamma):
        a, r = prior_sigma2.shape, prior_sigma2.rate
        return math.exp(math.lgamma(a + 0.5) - math.lgamma(a)) / math.sqrt(r)
    if isinstance(prior_sigma2, InverseGamma):
        a, s = prior_sigma2.shape, prior_sigma2.scale
        if a > 0.5:
            return math.sqrt(s) * math.exp(math.lgamma(a - 0.5) - math.lgamma(a))
        return math.sqrt(s / (a + 1.0))
    raise TypeError(type(prior_sigma2).__name__)


def init_start_values(
    y: np.ndarray, X: np.ndarray | None, priors: PriorSpec, offset: float = 1e-8
) -> tuple[SvParams, LatentPath]:
    """Deterministic chain start: OLS for beta, a conjugate normal-regression
    posterior mean for mu (log y^2 with the Laplace-approximate error law),
    prior means for the rest, and a flat latent path at the initial mu."""
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if n == 0:
        raise ValueError("empty data")
    if X is not None:
        if X.shape[0] != n or X.shape[0] < X.shape[1]:
            raise ValueError("design matrix must be (n, K) with n >= K")
        beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
        if rank < X.shape[1]:
            raise ValueError("design matrix is rank deficient")
    else:
        beta = np.empty(0)

    if isinstance(priors.mu, Constant):
        mu = priors.mu.value
    else:
        logy2 = np.log(y * y + offset)
        xi_mean, xi_var = -1.27, 4.934
        prec = n / xi_var + 1.0 / priors.mu.sd**2
        lin = np.sum(logy2 - xi_mean) / xi_var + priors.mu.mean / priors.mu.sd**2
        mu = lin / prec

    phi = float(priors.phi.dist_mean)
    sigma = _start_sigma(priors.sigma2)
    nu = float(priors.nu.dist_mean) + (2.0 if isinstance(priors.nu, Exponential) else 0.0)
    rho = float(priors.rho.dist_mean)
    params = SvParams(mu=mu, phi=phi, sigma=sigma, nu=nu, rho=rho, beta=beta)
    return params, LatentPath(h0=mu, h=np.full(n, mu))


# ---------------------------------------------------------------------------
# simulation


def simulate_sv(
    model_kind: str,
    params: SvParams,
    n: int,
    X: np.ndarray | None = None,
    rng: np.random.Generator | RngStream | None = None,
    latent0_variance="stationary",
):
    """Generate (y, h0, h, tau) from the model equations."""
    rng = rng.generator() if isinstance(rng, RngStream) else rng
    mu, phi, sigma, nu, rho = params.mu, params.phi, params.sigma, params.nu, params.rho
    if latent0_variance == "stationary":
        p0 = sigma**2 / (1.0 - phi**2)
    else:
        p0 = latent0_variance.value
    h0 = mu + math.sqrt(p0) * rng.standard_normal()
    z_obs = rng.standard_normal(n)
    z_lat = rng.standard_normal(n)
    eps = z_obs
    # eta[k] drives h_{k+1}; it pairs with eps of the same time index except
    # eta[0], whose partner observation does not exist.
    eta = z_lat.copy()
    if rho != 0.0:
        eta[1:] = rho * eps[:-1] + math.sqrt(1.0 - rho**2) * z_lat[1:]
    hc = signal.lfilter([1.0], [1.0, -phi], sigma * eta, zi=np.array([phi * (h0 - mu)]))[0]
    h = mu + hc
    tau = np.ones(n)
    if math.isfinite(nu):
        tau = (nu / 2.0) / rng.gamma(nu / 2.0, 1.0, size=n)
    y = np.exp(h / 2.0) * np.sqrt(tau) * eps
    if X is not None and params.beta.size:
        y = y + X @ params.beta
    return y, h0, h, tau


def simulate_y_given_state(
    model_kind: str, params: SvParams, latent: LatentPath, tau: np.ndarray,
    X: np.ndarray | None, rng: np.random.Generator,
) -> np.ndarray:
    """Draw data conditional on the full latent state.

    Used by the sampler-validation harness: with leverage, observations at
    t < n are conditionally normal around rho times the (known) state
    innovation, because both neighbouring states are part of the state.
    """
    h = latent.h
    n = h.shape[0]
    z = rng.standard_normal(n)
    eps = z.copy()
    if has_leverage(model_kind) and params.rho != 0.0 and n > 1:
        eta = (h[1:] - params.mu - params.phi * (h[:-1] - params.mu)) / params.sigma
        eps[: n - 1] = params.rho * eta + math.sqrt(1.0 - params.rho**2) * z[: n - 1]
    y = np.exp(h / 2.0) * np.sqrt(tau) * eps
    if X is not None and params.beta.size:
        y = y + X @ params.beta
    return y


# ---------------------------------------------------------------------------
# linearization and latent draws


def linearize_observations(e: np.ndarray, tau: np.ndarray | None, offset: float) -> np.ndarray:
    """ystar = log((y - x beta)^2 + offset) - log tau, overflow-safe."""
    abs_e = np.abs(e)
    with np.errstate(over="ignore"):
        ystar = np.where(abs_e > 1e100, 2.0 * np.log(np.maximum(abs_e, 1.0)), np.log(e * e + offset))
    if tau is not None:
        ystar = ystar - np.log(tau)
    return ystar


def _latent0_var(latent0_variance, phi: float, sigma2: float) -> tuple[float, bool]:
    if latent0_variance == "stationary":
        return sigma2 / (1.0 - phi * phi), True
    return float(latent0_variance.value), False


@njit(cache=True)
def _awol_kernel(obs_prec, obs_lin, phi, sig2, mu, p0, z):
    """Fused build + factor + solve for the no-leverage latent conditional."""
    n = obs_prec.shape[0]
    diag = np.empty(n + 1)
    lin = np.empty(n + 1)
    off = -phi / sig2
    diag[0] = 1.0 / p0 + phi * phi / sig2
    lin[0] = mu / p0 - mu * (1.0 - phi) * phi / sig2
    trans_mid = mu * (1.0 - phi) * (1.0 - phi) / sig2
    for t in range(1, n):
        diag[t] = obs_prec[t - 1] + (1.0 + phi * phi) / sig2
        lin[t] = obs_lin[t - 1] + trans_mid
    diag[n] = obs_prec[n - 1] + 1.0 / sig2
    lin[n] = obs_lin[n - 1] + mu * (1.0 - phi) / sig2

    # Cholesky of the tridiagonal precision, then forward and back solves
    ell = np.empty(n + 1)
    g = np.empty(n)
    if diag[0] <= 0.0:
        raise ValueError("latent precision is not positive definite")
    ell[0] = np.sqrt(diag[0])
    for i in range(n):
        g[i] = off / ell[i]
        d = diag[i + 1] - g[i] * g[i]
        if d <= 0.0:
            raise ValueError("latent precision is not positive definite")
        ell[i + 1] = np.sqrt(d)
    w = np.empty(n + 1)
    w[0] = lin[0] / ell[0]
    for i in range(1, n + 1):
        w[i] = (lin[i] - g[i - 1] * w[i - 1]) / ell[i]
    hh = np.empty(n + 1)
    hh[n] = (w[n] + z[n]) / ell[n]
    for i in range(n - 1, -1, -1):
        hh[i] = (w[i] + z[i] - g[i] * hh[i + 1]) / ell[i]
    return hh


def _awol_inputs(ystar, indicators, params: SvParams, table: MixtureTable, latent0_variance):
    sig2 = params.sigma * params.sigma
    v = table.variances[indicators]
    m = table.means[indicators]
    with np.errstate(divide="ignore"):
        c = np.where(np.isinf(v), 0.0, 1.0 / v)
    obs = np.where(c > 0, c * (ystar - m), 0.0)
    p0, _ = _latent0_var(latent0_variance, params.phi, sig2)
    return c, obs, sig2, p0


def draw_latent_awol(
    ystar: np.ndarray,
    indicators: np.ndarray,
    params: SvParams,
    table: MixtureTable,
    rng: np.random.Generator,
    latent0_variance="stationary",
) -> LatentPath:
    """Joint draw of (h_0, ..., h_n) for the linearized no-leverage model."""
    n = ystar.shape[0]
    c, obs, sig2, p0 = _awol_inputs(ystar, indicators, params, table, latent0_variance)
    hh = _awol_kernel(c, obs, params.phi, sig2, params.mu, p0, rng.standard_normal(n + 1))
    return LatentPath(h0=float(hh[0]), h=hh[1:])


def draw_latent_awol_batch(
    ystar: np.ndarray,
    indicators: np.ndarray,
    params: SvParams,
    table: MixtureTable,
    rng: np.random.Generator,
    latent0_variance="stationary",
    size: int = 1,
) -> np.ndarray:
    """Batch of joint latent draws sharing one conditional; (size, n + 1)."""
    n = ystar.shape[0]
    c, obs, sig2, p0 = _awol_inputs(ystar, indicators, params, table, latent0_variance)
    mu, phi = params.mu, params.phi
    diag = np.empty(n + 1)
    off = np.full(n, -phi / sig2)
    lin = np.empty(n + 1)
    diag[0] = 1.0 / p0 + phi * phi / sig2
    diag[1:n] = c[: n - 1] + (1.0 + phi * phi) / sig2
    diag[n] = c[n - 1] + 1.0 / sig2
    lin[0] = mu / p0 - mu * (1.0 - phi) * phi / sig2
    lin[1:n] = obs[: n - 1] + mu * (1.0 - phi) ** 2 / sig2
    lin[n] = obs[n - 1] + mu * (1.0 - phi) / sig2
    return sample_tridiag_mvn(diag, off, lin, rng.standard_normal((n + 1, size))).T


# ---------------------------------------------------------------------------
# parameter updates, no-leverage (fast) sampler


_LOG_2PI = math.log(2.0 * math.pi)


def _log_density_scalar(dist, x: float) -> float:
    """Fast scalar log densities for the prior families used in MH ratios."""
    if isinstance(dist, TranslatedBeta):
        b = (x + 1.0) / 2.0
        if not 0.0 < b < 1.0:
            return -math.inf
        a1, a2 = dist.shape1, dist.shape2
        return (
            (a1 - 1.0) * math.log(b)
            + (a2 - 1.0) * math.log1p(-b)
            - (math.lgamma(a1) + math.lgamma(a2) - math.lgamma(a1 + a2))
            - math.log(2.0)
        )
    if isinstance(dist, Normal):
        z = (x - dist.mean) / dist.sd
        return -0.5 * z * z - math.log(dist.sd) - 0.5 * _LOG_2PI
    if isinstance(dist, Gamma):
        if x <= 0.0:
            return -math.inf
        return (
            dist.shape * math.log(dist.rate)
            + (dist.shape - 1.0) * math.log(x)
            - dist.rate * x
            - math.lgamma(dist.shape)
        )
    if isinstance(dist, InverseGamma):
        if x <= 0.0:
            return -math.inf
        return (
            dist.shape * math.log(dist.scale)
            - math.lgamma(dist.shape)
            - (dist.shape + 1.0) * math.log(x)
            - dist.scale / x
        )
    return float(dist.log_density(x))


@njit(cache=True)
def _asis_stats(h0, h, z, v):
    """Raw sums over the path and the linearized observations from which all
    interweaving conditionals derive in constant time."""
    n = h.shape[0]
    slag = slag2 = scur = scur2 = scross = 0.0
    w0 = w1 = w2 = z0 = z1 = 0.0
    prev = h0
    for t in range(n):
        ht = h[t]
        slag += prev
        slag2 += prev * prev
        scur += ht
        scur2 += ht * ht
        scross += prev * ht
        iv = 1.0 / v[t]
        w0 += iv
        w1 += ht * iv
        w2 += ht * ht * iv
        z0 += z[t] * iv
        z1 += z[t] * ht * iv
        prev = ht
    return slag, slag2, scur, scur2, scross, w0, w1, w2, z0, z1


def _phi_mh_from_stats(
    sxx: float,
    sxy: float,
    sig2: float,
    prior_phi,
    phi_cur: float,
    h0_centered: float,
    stationary: bool,
    rng: np.random.Generator,
) -> float:
    """Independence MH for phi from the conjugate AR regression proposal."""
    if not (sxx > 0 and math.isfinite(sxx)):
        return phi_cur
    phat = sxy / sxx
    prop = phat + math.sqrt(sig2 / sxx) * rng.standard_normal()
    needs_unit = stationary or isinstance(prior_phi, TranslatedBeta)
    if needs_unit and not abs(prop) < 1.0:
        return phi_cur
    log_r = _log_density_scalar(prior_phi, prop) - _log_density_scalar(prior_phi, phi_cur)
    if stationary:
        log_r += 0.5 * (math.log1p(-prop * prop) - math.log1p(-phi_cur * phi_cur))
        log_r -= (h0_centered**2 / (2.0 * sig2)) * ((1.0 - prop * prop) - (1.0 - phi_cur * phi_cur))
    if math.log(rng.random()) < log_r:
        return prop
    return phi_cur


def _draw_phi_regression_mh(
    lag: np.ndarray,
    resp: np.ndarray,
    sig2: float,
    prior_phi,
    phi_cur: float,
    h0_centered: float,
    stationary: bool,
    rng: np.random.Generator,
) -> float:
    return _phi_mh_from_stats(
        float(lag @ lag), float(lag @ resp), sig2, prior_phi, phi_cur, h0_centered, stationary, rng
    )


def _draw_sigma2_centered(
    resid_ss: float,
    h0_centered: float,
    phi: float,
    prior_sigma2,
    sigma2_cur: float,
    stationary: bool,
    n: int,
    rng: np.random.Generator,
) -> float:
    if isinstance(prior_sigma2, Constant):
        return prior_sigma2.value
    if stationary:
        s_full = resid_ss + (1.0 - phi * phi) * h0_centered**2
        count = n + 1
    else:
        s_full = resid_ss
        count = n
    if isinstance(prior_sigma2, InverseGamma):
        shape = prior_sigma2.shape + count / 2.0
        scale = prior_sigma2.scale + s_full / 2.0
        return scale / rng.gamma(shape, 1.0)
    # Gamma prior: independence MH, proposal matches the likelihood exactly
    a_q = count / 2.0 - 1.0
    if a_q <= 0:
        return sigma2_cur
    prop = (s_full / 2.0) / rng.gamma(a_q, 1.0)
    log_r = _log_density_scalar(prior_sigma2, prop) - _log_density_scalar(prior_sigma2, sigma2_cur)
    if math.log(rng.random()) < log_r:
        return prop
    return sigma2_cur


def _mu_gibbs_from_stats(
    h0: float,
    sum_g: float,
    phi: float,
    sig2: float,
    prior_mu,
    latent0_variance,
    n: int,
    rng: np.random.Generator,
) -> float:
    b_mu, big_b = prior_mu.mean, prior_mu.sd**2
    prec = 1.0 / big_b + n * (1.0 - phi) ** 2 / sig2
    lin = b_mu / big_b + (1.0 - phi) * sum_g / sig2
    if latent0_variance == "stationary":
        prec += (1.0 - phi * phi) / sig2
        lin += (1.0 - phi * phi) * h0 / sig2
    else:
        bh = latent0_variance.value
        prec += 1.0 / bh
        lin += h0 / bh
    return lin / prec + math.sqrt(1.0 / prec) * rng.standard_normal()


def _draw_mu_centered(
    h0: float,
    h: np.ndarray,
    phi: float,
    sig2: float,
    prior_mu,
    latent0_variance,
    rng: np.random.Generator,
) -> float:
    if isinstance(prior_mu, Constant):
        return prior_mu.value
    lag = np.concatenate(([h0], h[:-1]))
    sum_g = float(np.sum(h - phi * lag))
    return _mu_gibbs_from_stats(
        h0, sum_g, phi, sig2, prior_mu, latent0_variance, h.shape[0], rng
    )


def _musigma_nc_from_stats(
    w0: float,
    sh: float,
    shh: float,
    z0: float,
    szh: float,
    htil0: float,
    priors: PriorSpec,
    mu_cur: float,
    sigma_cur: float,
    mu_skip: bool,
    sigma_skip: bool,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Conjugate draw of (mu, signed sigma) from the noncentered observation
    regression zobs = mu + sigma * htil + N(0, v), given the weighted sums
    w0 = sum 1/v, sh = sum htil/v, shh = sum htil^2/v, z0 = sum z/v and
    szh = sum z htil/v.

    The sigma part needs the half-normal prior (sigma^2 ~ Gamma(1/2, rate),
    equivalently signed sigma ~ N(0, 1/(2 rate))); other sigma priors fall
    back to a mu-only draw.  Under a fixed latent0 variance the draw gets an
    MH correction because the noncentered initial state then depends on
    sigma.
    """
    mu_free = (not mu_skip) and isinstance(priors.mu, Normal)
    sigma_free = (
        (not sigma_skip) and isinstance(priors.sigma2, Gamma) and priors.sigma2.shape == 0.5
    )
    if not mu_free and not sigma_free:
        return mu_cur, sigma_cur
    stationary = priors.latent0_variance == "stationary"

    if mu_free and sigma_free:
        b_sig = 1.0 / (2.0 * priors.sigma2.rate)
        s11 = w0 + 1.0 / priors.mu.sd**2
        s12 = sh
        s22 = shh + 1.0 / b_sig
        l1 = z0 + priors.mu.mean / priors.mu.sd**2
        l2 = szh
        l11 = math.sqrt(s11)
        l21 = s12 / l11
        d = s22 - l21 * l21
        if d <= 0:
            return mu_cur, sigma_cur
        l22 = math.sqrt(d)
        w1 = l1 / l11
        w2 = (l2 - l21 * w1) / l22
        g1, g2 = rng.standard_normal(2)
        sig_new = (w2 + g2) / l22
        mu_new = (w1 + g1 - l21 * sig_new) / l11
    elif mu_free:
        prec = w0 + 1.0 / priors.mu.sd**2
        lin = z0 - sigma_cur * sh + priors.mu.mean / priors.mu.sd**2
        mu_new = lin / prec + math.sqrt(1.0 / prec) * rng.standard_normal()
        sig_new = sigma_cur
    else:
        b_sig = 1.0 / (2.0 * priors.sigma2.rate)
        prec = shh + 1.0 / b_sig
        lin = szh - mu_cur * sh
        sig_new = lin / prec + math.sqrt(1.0 / prec) * rng.standard_normal()
        mu_new = mu_cur

    if not stationary:
        bh = priors.latent0_variance.value
        log_r = math.log(abs(sig_new) / sigma_cur) - htil0**2 * (sig_new**2 - sigma_cur**2) / (
            2.0 * bh
        )
        if not math.log(rng.random()) < log_r:
            return mu_cur, sigma_cur
    return mu_new, sig_new


def _draw_musigma_noncentered(
    htil0: float,
    htil: np.ndarray,
    zobs: np.ndarray,
    v: np.ndarray,
    priors: PriorSpec,
    mu_cur: float,
    sigma_cur: float,
    rng: np.random.Generator,
) -> tuple[float, float]:
    iv = 1.0 / v
    return _musigma_nc_from_stats(
        float(np.sum(iv)),
        float(np.sum(htil * iv)),
        float(np.sum(htil * htil * iv)),
        float(np.sum(zobs * iv)),
        float(np.sum(zobs * htil * iv)),
        htil0,
        priors,
        mu_cur,
        sigma_cur,
        False,
        False,
        rng,
    )


def draw_sv_params_asis(
    latent: LatentPath,
    ystar: np.ndarray,
    indicators: np.ndarray,
    params: SvParams,
    priors: PriorSpec,
    rng: np.random.Generator,
    table: MixtureTable | None = None,
    skip: frozenset = frozenset(),
) -> tuple[SvParams, LatentPath]:
    """Centered draw of (mu, phi, sigma) followed by a noncentered re-draw.

    The noncentered leg re-expresses the latent path, so the returned
    LatentPath differs from the input whenever mu or sigma moved.  All
    conditionals are computed from one pass of raw sums over the path.
    """
    table = table if table is not None else mixture_table()
    h0, h = latent.h0, latent.h
    n = h.shape[0]
    mu, phi, sigma = params.mu, params.phi, params.sigma
    stationary = priors.latent0_variance == "stationary"

    zobs = ystar - table.means[indicators]
    v = table.variances[indicators]
    slag, slag2, scur, scur2, scross, w0, w1, w2, z0, z1 = _asis_stats(
        h0, np.ascontiguousarray(h), np.ascontiguousarray(zobs), np.ascontiguousarray(v)
    )

    mu_skip = "mu" in skip or isinstance(priors.mu, Constant)
    phi_skip = "phi" in skip or isinstance(priors.phi, Constant)
    sigma_skip = "sigma" in skip or isinstance(priors.sigma2, Constant)

    # centered leg (conditioning on the path entering the sweep)
    sxx_c = slag2 - 2.0 * mu * slag + n * mu * mu
    sxy_c = scross - mu * (slag + scur) + n * mu * mu
    syy_c = scur2 - 2.0 * mu * scur + n * mu * mu
    if not phi_skip:
        phi = _phi_mh_from_stats(
            sxx_c, sxy_c, sigma * sigma, priors.phi, phi, h0 - mu, stationary, rng
        )
    if not sigma_skip:
        resid_ss = max(syy_c - 2.0 * phi * sxy_c + phi * phi * sxx_c, 0.0)
        sig2 = _draw_sigma2_centered(
            resid_ss, h0 - mu, phi, priors.sigma2, sigma * sigma, stationary, n, rng
        )
        sigma = math.sqrt(sig2)
    if not mu_skip:
        mu = _mu_gibbs_from_stats(
            h0, scur - phi * slag, phi, sigma * sigma, priors.mu, priors.latent0_variance, n, rng
        )
    if "noncentered" in skip:
        return replace(params, mu=mu, phi=phi, sigma=sigma), LatentPath(h0=h0, h=h)

    # noncentered leg on htil = (h - mu)/sigma, derived from the same sums
    mu_at, sigma_at = mu, sigma
    htil0 = (h0 - mu_at) / sigma_at
    if not phi_skip:
        sxx_t = (slag2 - 2.0 * mu_at * slag + n * mu_at * mu_at) / (sigma_at * sigma_at)
        sxy_t = (scross - mu_at * (slag + scur) + n * mu_at * mu_at) / (sigma_at * sigma_at)
        phi = _phi_mh_from_stats(sxx_t, sxy_t, 1.0, priors.phi, phi, htil0, stationary, rng)
    sig_signed = sigma
    if not (mu_skip and sigma_skip):
        sh = (w1 - mu_at * w0) / sigma_at
        shh = (w2 - 2.0 * mu_at * w1 + mu_at * mu_at * w0) / (sigma_at * sigma_at)
        szh = (z1 - mu_at * z0) / sigma_at
        mu, sig_signed = _musigma_nc_from_stats(
            w0, sh, shh, z0, szh, htil0, priors, mu, sigma, mu_skip, sigma_skip, rng
        )
        sigma = abs(sig_signed)

    scale = sig_signed / sigma_at
    h0_new = mu + scale * (h0 - mu_at)
    h_new = mu + scale * (h - mu_at)
    out = replace(params, mu=mu, phi=phi, sigma=sigma)
    return out, LatentPath(h0=h0_new, h=h_new)


def draw_tail_latents(
    y: np.ndarray, X: np.ndarray | None, h: np.ndarray, params: SvParams, rng: np.random.Generator
) -> np.ndarray:
    """tau_t from its inverse-gamma full conditional (no-leverage models)."""
    if not math.isfinite(params.nu):
        return np.ones(y.shape[0])
    e = y - X @ params.beta if X is not None and params.beta.size else y
    eps = e * np.exp(-h / 2.0)
    shape = (params.nu + 1.0) / 2.0
    scale = (params.nu + eps * eps) / 2.0
    return scale / rng.gamma(shape, 1.0, size=y.shape[0])


@dataclass
class MhStep:
    """Random-walk step size with Robbins-Monro adaptation during burn-in."""

    step: float
    target: float = 0.35
    count: int = 0

    def update(self, accepted: bool, adapting: bool):
        if adapting:
            self.count += 1
            gamma = 1.0 / (10.0 + self.count) ** 0.6
            self.step *= math.exp(gamma * ((1.0 if accepted else 0.0) - self.target))


def draw_nu(
    tau: np.ndarray,
    priors: PriorSpec,
    nu_cur: float,
    rng: np.random.Generator,
    step: MhStep,
    adapting: bool = False,
) -> float:
    """Metropolis step for nu on log(nu - 2), restricted to nu > 2."""
    if not isinstance(priors.nu, Exponential):
        return nu_cur
    n = tau.shape[0]
    s_log = float(np.sum(np.log(tau)))
    s_inv = float(np.sum(1.0 / tau))
    lam = priors.nu.rate

    def log_target(nu: float) -> float:
        half = nu / 2.0
        return (
            -lam * (nu - 2.0)
            + n * (half * math.log(half) - math.lgamma(half))
            - (half + 1.0) * s_log
            - half * s_inv
        )

    zeta = math.log(nu_cur - 2.0)
    zeta_prop = zeta + step.step * rng.standard_normal()
    nu_prop = 2.0 + math.exp(zeta_prop)
    log_r = log_target(nu_prop) - log_target(nu_cur) + (zeta_prop - zeta)
    accepted = math.log(rng.random()) < log_r
    step.update(accepted, adapting)
    return nu_prop if accepted else nu_cur


def draw_beta(
    y: np.ndarray,
    X: np.ndarray,
    h: np.ndarray,
    tau: np.ndarray,
    params: SvParams,
    priors: PriorSpec,
    rng: np.random.Generator,
    eta: np.ndarray | None = None,
) -> np.ndarray:
    """Conjugate multivariate-normal draw of the regression coefficients.

    Without leverage the working weights are exp(-h_t)/tau_t.  With leverage
    (``eta`` given, length n-1) the observation means shift by
    rho * exp(h/2) sqrt(tau) * eta and the conditional variances shrink by
    (1 - rho^2) for all but the last time point.
    """
    n = y.shape[0]
    w = np.exp(-h) / tau
    resp = y
    rho = params.rho
    if eta is not None and rho != 0.0 and n > 1:
        resp = y.copy()
        resp[: n - 1] -= rho * np.exp(h[: n - 1] / 2.0) * np.sqrt(tau[: n - 1]) * eta
        w = w.copy()
        w[: n - 1] /= 1.0 - rho * rho
    prior = priors.beta
    prec = prior._prec + (X.T * w) @ X
    lin = prior._prec @ prior.mean + X.T @ (w * resp)
    try:
        ell = np.linalg.cholesky(prec)
    except np.linalg.LinAlgError as exc:
        raise SamplerError("singular posterior precision in beta draw") from exc
    tmp = np.linalg.solve(ell, lin)
    return np.linalg.solve(ell.T, tmp + rng.standard_normal(X.shape[1]))


# ---------------------------------------------------------------------------
# leverage sampler pieces


def _leverage_logweights(ystar, h, d, params, table):
    n = ystar.shape[0]
    mu, phi, sigma, rho = params.mu, params.phi, params.sigma, params.rho
    xi = ystar[:, None] - h[:, None] - table.means[None, :]
    logw = (
        np.log(table.probs)[None, :]
        - 0.5 * np.log(table.variances)[None, :]
        - 0.5 * xi * xi / table.variances[None, :]
    )
    if n > 1 and rho != 0.0:
        big_a = table.coef_a * np.exp(table.means / 2.0)
        big_b = table.coef_b * np.exp(table.means / 2.0)
        etastar = h[1:] - mu - phi * (h[:-1] - mu)
        mean = d[: n - 1, None] * rho * sigma * (big_a[None, :] + big_b[None, :] * xi[: n - 1])
        q2 = sigma * sigma * (1.0 - rho * rho)
        logw[: n - 1] += -0.5 * (etastar[:, None] - mean) ** 2 / q2
    return logw


def draw_indicators_leverage(ystar, h, d, params, table, rng):
    from .mixture import OffsetUnderflowError, _categorical_rows

    if not np.all(np.isfinite(ystar)):
        raise OffsetUnderflowError("non-finite linearized observation")
    return _categorical_rows(_leverage_logweights(ystar, h, d, params, table), rng)


def draw_latent_leverage(
    ystar: np.ndarray,
    d: np.ndarray,
    indicators: np.ndarray,
    params: SvParams,
    table: MixtureTable,
    rng: np.random.Generator,
    latent0_variance="stationary",
) -> LatentPath:
    """Joint latent draw under the leverage-coupled mixture approximation."""
    n = ystar.shape[0]
    mu, phi, sigma, rho = params.mu, params.phi, params.sigma, params.rho
    sig2 = sigma * sigma
    v = table.variances[indicators]
    m = table.means[indicators]
    c = 1.0 / v
    p0, _ = _latent0_var(latent0_variance, phi, sig2)

    diag = np.zeros(n + 1)
    off = np.zeros(n)
    lin = np.zeros(n + 1)
    # initial state and the uncoupled first transition
    diag[0] = 1.0 / p0 + phi * phi / sig2
    diag[1] += 1.0 / sig2
    off[0] = -phi / sig2
    lin[0] = mu / p0 - mu * (1.0 - phi) * phi / sig2
    lin[1] += mu * (1.0 - phi) / sig2
    # observations
    diag[1:] += c
    lin[1:] += c * (ystar - m)
    if n > 1:
        # coupled transitions t = 1 .. n-1 (state indices 1..n-1 -> 2..n)
        big_a = table.coef_a[indicators[: n - 1]] * np.exp(m[: n - 1] / 2.0)
        big_b = table.coef_b[indicators[: n - 1]] * np.exp(m[: n - 1] / 2.0)
        dd = d[: n - 1]
        q2 = sig2 * (1.0 - rho * rho)
        phi_star = phi - dd * rho * sigma * big_b
        k = mu * (1.0 - phi) + dd * rho * sigma * (big_a + big_b * (ystar[: n - 1] - m[: n - 1]))
        diag[1:n] += phi_star * phi_star / q2
        diag[2:] += 1.0 / q2
        off[1:] += -phi_star / q2
        lin[1:n] += -phi_star * k / q2
        lin[2:] += k / q2

    hh = sample_tridiag_mvn(diag, off, lin, rng.standard_normal(n + 1))
    return LatentPath(h0=float(hh[0]), h=hh[1:])


def _draw_mu_leverage(h0, h, eps, phi, sigma, rho, priors, rng):
    """Exact Gaussian conditional of mu given the path and the standardized
    observation residuals (centered parameterization, leverage model)."""
    if isinstance(priors.mu, Constant):
        return priors.mu.value
    n = h.shape[0]
    sig2 = sigma * sigma
    hh = np.concatenate(([h0], h))
    g = hh[1:] - phi * hh[:-1]
    b_mu, big_b = priors.mu.mean, priors.mu.sd**2
    one_m = 1.0 - phi
    prec = 1.0 / big_b + one_m**2 / sig2
    lin = b_mu / big_b + one_m * g[0] / sig2
    if n > 1:
        q2 = sig2 * (1.0 - rho * rho)
        prec += (n - 1) * one_m**2 / q2
        lin += one_m * float(np.sum(g[1:] - sigma * rho * eps[: n - 1])) / q2
    if priors.latent0_variance == "stationary":
        prec += (1.0 - phi * phi) / sig2
        lin += (1.0 - phi * phi) * h0 / sig2
    else:
        bh = priors.latent0_variance.value
        prec += 1.0 / bh
        lin += h0 / bh
    return rng.normal(lin / prec, math.sqrt(1.0 / prec))


def _draw_phi_leverage(h0, h, eps, mu, phi, sigma, rho, priors, rng):
    """Independence MH for phi with the coupling-aware Gaussian proposal."""
    if isinstance(priors.phi, Constant):
        return priors.phi.value
    n = h.shape[0]
    sig2 = sigma * sigma
    u = np.concatenate(([h0], h)) - mu
    x = u[:-1]
    r = u[1:].copy()
    w = np.ones(n)
    if n > 1:
        w[1:] = 1.0 / (1.0 - rho * rho)
        r[1:] -= sigma * rho * eps[: n - 1]
    sxx = float(np.sum(w * x * x))
    if not (sxx > 0 and math.isfinite(sxx)):
        return phi
    phat = float(np.sum(w * x * r)) / sxx
    stationary = priors.latent0_variance == "stationary"
    prop = rng.normal(phat, math.sqrt(sig2 / sxx))
    needs_unit = stationary or isinstance(priors.phi, TranslatedBeta)
    if needs_unit and not abs(prop) < 1.0:
        return phi
    log_r = _log_density_scalar(priors.phi, prop) - _log_density_scalar(priors.phi, phi)
    if stationary:
        log_r += 0.5 * (math.log1p(-prop * prop) - math.log1p(-phi * phi))
        log_r -= (u[0] ** 2 / (2.0 * sig2)) * ((1.0 - prop * prop) - (1.0 - phi * phi))
    if math.log(rng.random()) < log_r:
        return prop
    return phi


def _draw_sigma2_leverage(h0, h, eps, mu, phi, sigma, rho, priors, rng):
    """Independence MH for sigma^2: inverse-gamma proposal from the quadratic
    part of the exact density; the cross term and the prior enter the ratio."""
    if isinstance(priors.sigma2, Constant):
        return priors.sigma2.value
    n = h.shape[0]
    u = np.concatenate(([h0], h)) - mu
    delta = u[1:] - phi * u[:-1]
    stationary = priors.latent0_variance == "stationary"
    a_quad = delta[0] ** 2
    b_cross = 0.0
    if n > 1:
        a_quad += float(np.sum(delta[1:] ** 2)) / (1.0 - rho * rho)
        b_cross = rho * float(np.sum(eps[: n - 1] * delta[1:])) / (1.0 - rho * rho)
    count = n
    if stationary:
        a_quad += (1.0 - phi * phi) * u[0] ** 2
        count += 1
    a_q = count / 2.0 - 1.0
    if a_q <= 0:
        return sigma * sigma
    x_cur = sigma * sigma
    x_prop = (a_quad / 2.0) / rng.gamma(a_q, 1.0)
    log_r = (
        _log_density_scalar(priors.sigma2, x_prop)
        - _log_density_scalar(priors.sigma2, x_cur)
        + b_cross * (1.0 / math.sqrt(x_prop) - 1.0 / math.sqrt(x_cur))
    )
    if math.log(rng.random()) < log_r:
        return x_prop
    return x_cur


def draw_rho(h0, h, eps, mu, phi, sigma, rho_cur, priors, rng, step: MhStep, adapting=False):
    """Random-walk MH for rho on atanh(rho) against the exact density."""
    if isinstance(priors.rho, Constant):
        return priors.rho.value
    n = h.shape[0]
    if n < 2:
        return rho_cur
    u = np.concatenate(([h0], h)) - mu
    eta = (u[1:] - phi * u[:-1])[1:] / sigma
    e = eps[: n - 1]
    s_ee = float(e @ e)
    s_eh = float(e @ eta)
    s_hh = float(eta @ eta)
    m = n - 1

    def log_target(rho: float) -> float:
        om = 1.0 - rho * rho
        return (
            -(s_hh - 2.0 * rho * s_eh + rho * rho * s_ee) / (2.0 * om)
            - m / 2.0 * math.log(om)
            + _log_density_scalar(priors.rho, rho)
            + math.log(om)  # Jacobian of the atanh walk
        )

    z = math.atanh(rho_cur) + step.step * rng.standard_normal()
    rho_prop = math.tanh(z)
    log_r = log_target(rho_prop) - log_target(rho_cur)
    accepted = math.log(rng.random()) < log_r
    step.update(accepted, adapting)
    return rho_prop if accepted else rho_cur


def _nc_leverage_logtarget(mu, sigma, htil0, htil, phi, rho, c_resid, priors):
    """(mu, sigma)-dependent part of log p(y, htilde | theta), noncentered.

    Uses the p(eps) p(eta | eps) factorization of the coupled pairs; the
    eps-marginal terms depend on (mu, sigma) here because the observation
    residuals are standardized by exp((mu + sigma htilde)/2).
    """
    n = htil.shape[0]
    h = mu + sigma * htil
    with np.errstate(over="ignore"):
        eps = c_resid * np.exp(-h / 2.0)
        lp = -0.5 * float(np.sum(h)) - 0.5 * float(np.sum(eps * eps))
        if n > 1:
            eta = htil[1:] - phi * htil[:-1]
            om = 1.0 - rho * rho
            lp += -0.5 * float(np.sum((eta - rho * eps[: n - 1]) ** 2)) / om
    if not math.isfinite(lp):
        return -math.inf
    lp += _log_density_scalar(priors.mu, mu) if isinstance(priors.mu, Normal) else 0.0
    if not isinstance(priors.sigma2, Constant):
        lp += _log_density_scalar(priors.sigma2, sigma * sigma) + math.log(2.0 * sigma)
    if priors.latent0_variance != "stationary":
        bh = priors.latent0_variance.value
        lp += math.log(sigma) - sigma * sigma * htil0**2 / (2.0 * bh)
    return lp


def _update_theta_leverage(state, y, X, priors, rng, steps, adapting):
    """One interweaving pass over (mu, phi, sigma, rho): centered updates with
    strong proposals, then noncentered random-walk re-draws of mu and sigma."""
    n = state.h.shape[0]
    e = y - X @ state.beta if X is not None and state.beta.size else y
    c_resid = e / np.sqrt(state.tau)
    eps = c_resid * np.exp(-state.h / 2.0)

    state.mu = _draw_mu_leverage(state.h0, state.h, eps, state.phi, state.sigma, state.rho, priors, rng)
    state.phi = _draw_phi_leverage(state.h0, state.h, eps, state.mu, state.phi, state.sigma, state.rho, priors, rng)
    sig2 = _draw_sigma2_leverage(state.h0, state.h, eps, state.mu, state.phi, state.sigma, state.rho, priors, rng)
    state.sigma = math.sqrt(sig2)
    state.rho = draw_rho(
        state.h0, state.h, eps, state.mu, state.phi, state.sigma, state.rho, priors, rng,
        steps["rho"], adapting,
    )

    # noncentered re-draws of mu and sigma against the exact density
    htil0 = (state.h0 - state.mu) / state.sigma
    htil = (state.h - state.mu) / state.sigma
    mu, sigma = state.mu, state.sigma
    cur_lp = _nc_leverage_logtarget(mu, sigma, htil0, htil, state.phi, state.rho, c_resid, priors)
    if isinstance(priors.mu, Normal):
        prop = mu + steps["nc_mu"].step * rng.standard_normal()
        lp = _nc_leverage_logtarget(prop, sigma, htil0, htil, state.phi, state.rho, c_resid, priors)
        accepted = math.log(rng.random()) < lp - cur_lp
        steps["nc_mu"].update(accepted, adapting)
        if accepted:
            mu, cur_lp = prop, lp
    if not isinstance(priors.sigma2, Constant):
        prop = sigma * math.exp(steps["nc_sigma"].step * rng.standard_normal())
        lp = (
            _nc_leverage_logtarget(mu, prop, htil0, htil, state.phi, state.rho, c_resid, priors)
            + math.log(prop)  # Jacobian of the log-sigma walk
        )
        accepted = math.log(rng.random()) < lp - (cur_lp + math.log(sigma))
        steps["nc_sigma"].update(accepted, adapting)
        if accepted:
            sigma = prop
    state.mu, state.sigma = mu, sigma
    state.h0 = mu + sigma * htil0
    state.h = mu + sigma * htil


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class _ChainState:
    mu: float
    phi: float
    sigma: float
    nu: float
    rho: float
    beta: np.ndarray
    h0: float
    h: np.ndarray
    tau: np.ndarray
    steps: dict

    def params(self) -> SvParams:
        return SvParams(self.mu, self.phi, self.sigma, self.nu, self.rho, self.beta)


def _default_steps() -> dict:
    return {
        "nu": MhStep(0.5),
        "rho": MhStep(0.5),
        "nc_mu": MhStep(0.5),
        "nc_sigma": MhStep(0.5),
    }


def _init_state(y, X, model_kind, priors, offset) -> _ChainState:
    params, latent = init_start_values(y, X, priors, offset)
    n = y.shape[0]
    return _ChainState(
        mu=params.mu,
        phi=params.phi,
        sigma=params.sigma,
        nu=params.nu,
        rho=params.rho,
        beta=params.beta,
        h0=latent.h0,
        h=latent.h,
        tau=np.ones(n),
        steps=_default_steps(),
    )


def sweep_fast(state, y, X, table, priors, model_kind, rng, offset, adapting=False, skip=frozenset()):
    """One full Gibbs sweep of the no-leverage sampler."""
    e = y - X @ state.beta if X is not None and state.beta.size else y
    t_errors = has_t_errors(model_kind)
    ystar = linearize_observations(e, state.tau if t_errors else None, offset)

    if "indicators" not in skip:
        s = draw_indicators(ystar, state.h, table, rng)
    else:
        s = np.zeros(y.shape[0], dtype=np.int64)
    if "latent" not in skip:
        latent = draw_latent_awol(ystar, s, state.params(), table, rng, priors.latent0_variance)
        state.h0, state.h = latent.h0, latent.h
    params, latent = draw_sv_params_asis(
        LatentPath(state.h0, state.h), ystar, s, state.params(), priors, rng, table, skip
    )
    state.mu, state.phi, state.sigma = params.mu, params.phi, params.sigma
    state.h0, state.h = latent.h0, latent.h

    if t_errors and "tau" not in skip:
        state.tau = draw_tail_latents(y, X, state.h, state.params(), rng)
        if "nu" not in skip:
            state.nu = draw_nu(state.tau, priors, state.nu, rng, state.steps["nu"], adapting)
    if X is not None and state.beta.size and "beta" not in skip:
        state.beta = draw_beta(y, X, state.h, state.tau, state.params(), priors, rng)


def sweep_general(
    state, y, X, table, priors, model_kind, rng, offset, adapting=False, skip=frozenset(), interweave=1
):
    """One full sweep of the leverage sampler."""
    n = y.shape[0]
    t_errors = has_t_errors(model_kind)
    e = y - X @ state.beta if X is not None and state.beta.size else y
    d = np.where(e >= 0, 1.0, -1.0)
    ystar = linearize_observations(e, state.tau if t_errors else None, offset)

    if "indicators" not in skip:
        s = draw_indicators_leverage(ystar, state.h, d, state.params(), table, rng)
    else:
        s = np.zeros(n, dtype=np.int64)
    if "latent" not in skip:
        latent = draw_latent_leverage(ystar, d, s, state.params(), table, rng, priors.latent0_variance)
        state.h0, state.h = latent.h0, latent.h

    for _ in range(max(interweave, 1)):
        _update_theta_leverage_skip(state, y, X, priors, rng, state.steps, adapting, skip)

    if t_errors and "tau" not in skip:
        c_resid_base = e * np.exp(-state.h / 2.0)
        eta = np.empty(0)
        if n > 1:
            eta = (state.h[1:] - state.mu - state.phi * (state.h[:-1] - state.mu)) / state.sigma
        state.tau = _tau_update_leverage(c_resid_base, eta, state.nu, state.rho, state.tau, rng)
        if "nu" not in skip:
            state.nu = draw_nu(state.tau, priors, state.nu, rng, state.steps["nu"], adapting)
    if X is not None and state.beta.size and "beta" not in skip:
        eta = None
        if n > 1:
            eta = (state.h[1:] - state.mu - state.phi * (state.h[:-1] - state.mu)) / state.sigma
        state.beta = draw_beta(y, X, state.h, state.tau, state.params(), priors, rng, eta=eta)


def _update_theta_leverage_skip(state, y, X, priors, rng, steps, adapting, skip):
    pri = priors
    if "mu" in skip and not isinstance(pri.mu, Constant):
        pri = replace(pri, mu=Constant(state.mu))
    if "sigma" in skip and not isinstance(pri.sigma2, Constant):
        pri = replace(pri, sigma2=Constant(state.sigma**2))
    if "phi" in skip and not isinstance(pri.phi, Constant):
        pri = replace(pri, phi=Constant(state.phi))
    if "rho" in skip and not isinstance(pri.rho, Constant):
        pri = replace(pri, rho=Constant(state.rho))
    _update_theta_leverage(state, y, X, pri, rng, steps, adapting)


def _tau_update_leverage(c_resid_base, eta, nu, rho, tau_cur, rng):
    """Scale-mixture latents under leverage.

    c_resid_base holds (y - x beta) exp(-h/2); the full conditional at the
    last time point is inverse gamma, elsewhere the sqrt(tau) cross term is
    handled by an independence MH step whose proposal matches the remaining
    density exactly.
    """
    if not math.isfinite(nu):
        return np.ones(c_resid_base.shape[0])
    n = c_resid_base.shape[0]
    c2 = c_resid_base * c_resid_base
    om = 1.0 - rho * rho
    scale = np.empty(n)
    scale[: n - 1] = (nu + c2[: n - 1] / om) / 2.0
    scale[n - 1] = (nu + c2[n - 1]) / 2.0
    prop = scale / rng.gamma((nu + 1.0) / 2.0, 1.0, size=n)
    if n > 1 and rho != 0.0:
        cross = rho * eta * c_resid_base[: n - 1] / om
        log_acc = cross * (1.0 / np.sqrt(prop[: n - 1]) - 1.0 / np.sqrt(tau_cur[: n - 1]))
        rej = np.log(rng.random(n - 1)) >= log_acc
        prop[: n - 1] = np.where(rej, tau_cur[: n - 1], prop[: n - 1])
    return prop


# ---------------------------------------------------------------------------
# driver


def run_sampler(
    y,
    designmatrix=None,
    model_kind: str = "sv",
    priors: PriorSpec | None = None,
    config: SvConfig | None = None,
) -> SvDraws:
    """Run the MCMC sampler and return the stored draws.

    ``y`` is the raw series; an "arP" designmatrix consumes the first P
    observations as lags.  Chains run sequentially on independent Philox
    streams (stream id = chain index), so results are reproducible and
    independent of how many chains run.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] < 2:
        raise ValueError("y must be a vector with at least 2 observations")
    if not np.all(np.isfinite(y)):
        raise ValueError("y must be finite")
    y_used, X, dm_record, ar_order = build_design(y, designmatrix)
    k = 0 if X is None else X.shape[1]

    if priors is None:
        priors = default_priors(model_kind, max(k, 1))
    if k > 0:
        priors = replace(priors, beta=expand_beta_prior(priors.beta, k))
    priors = validate(priors, model_kind)
    cfg = resolve_config(config if config is not None else SvConfig(), model_kind)

    table = mixture_table("leverage" if has_leverage(model_kind) else "no_leverage")
    leverage = has_leverage(model_kind)
    t_errors = has_t_errors(model_kind)
    n = y_used.shape[0]

    kept_para = -(-cfg.draws // cfg.thinpara)
    kept_lat = -(-cfg.draws // cfg.thinlatent)
    total_para = kept_para * cfg.chains
    total_lat = kept_lat * cfg.chains
    lat_width = n if cfg.keeptime == "all" else 1

    mu_s = np.empty(total_para)
    phi_s = np.empty(total_para)
    sigma_s = np.empty(total_para)
    nu_s = np.empty(total_para) if t_errors else None
    rho_s = np.empty(total_para) if leverage else None
    beta_s = np.empty((total_para, k)) if k > 0 else None
    lat0_s = np.empty(total_lat)
    lat_s = np.empty((total_lat, lat_width))
    lat_last_s = np.empty(total_para)
    tau_last_s = np.empty(total_para) if t_errors else None
    chain_s = np.empty(total_para, dtype=np.int64)

    for chain in range(cfg.chains):
        rng = RngStream(cfg.seed, cfg.stream_offset + chain).generator()
        state = _init_state(y_used, X, model_kind, priors, cfg.offset)
        ip = chain * kept_para
        il = chain * kept_lat
        for sweep_idx in range(cfg.burnin + cfg.draws):
            adapting = cfg.adapt and sweep_idx < cfg.burnin
            try:
                if leverage:
                    sweep_general(
                        state, y_used, X, table, priors, model_kind, rng, cfg.offset,
                        adapting, interweave=cfg.interweave,
                    )
                else:
                    sweep_fast(
                        state, y_used, X, table, priors, model_kind, rng, cfg.offset, adapting
                    )
            except Exception as exc:
                raise SamplerError(f"sweep {sweep_idx} (chain {chain}): {exc}") from exc
            post = sweep_idx - cfg.burnin
            if post < 0:
                continue
            if post % cfg.thinpara == 0:
                j = ip + post // cfg.thinpara
                mu_s[j] = state.mu
                phi_s[j] = state.phi
                sigma_s[j] = state.sigma
                if nu_s is not None:
                    nu_s[j] = state.nu
                if rho_s is not None:
                    rho_s[j] = state.rho
                if beta_s is not None:
                    beta_s[j] = state.beta
                lat_last_s[j] = state.h[-1]
                if tau_last_s is not None:
                    tau_last_s[j] = state.tau[-1]
                chain_s[j] = chain
            if post % cfg.thinlatent == 0:
                j = il + post // cfg.thinlatent
                lat0_s[j] = state.h0
                lat_s[j] = state.h if cfg.keeptime == "all" else state.h[-1:]

    return SvDraws(
        model_kind=model_kind,
        mu=mu_s,
        phi=phi_s,
        sigma=sigma_s,
        nu=nu_s,
        rho=rho_s,
        beta=beta_s,
        latent0=lat0_s,
        latent=lat_s,
        latent_last=lat_last_s,
        tau_last=tau_last_s,
        chain=chain_s,
        priors=priors,
        config=cfg,
        y=y_used,
        X=X,
        designmatrix=dm_record,
        ar_order=ar_order,
    )
