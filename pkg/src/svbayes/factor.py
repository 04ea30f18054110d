"""Multivariate factor SV: y_t = beta + Lambda f_t + e_t, with every factor
and idiosyncratic variance following its own vanilla SV process.

The sampler alternates factor draws, row-wise conjugate loadings draws,
shrinkage-latent draws (normal-gamma priors), per-process univariate SV
updates (reusing the fast univariate machinery, with the factor levels
pinned at zero for scale identification), and interweaving moves that
trade scale between the loadings and the factor log-variances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .distributions import Constant, Gamma, Infinity, Normal, RngStream, TranslatedBeta, draw_gig
from .mixture import draw_indicators, mixture_table
from .priors import PriorSpec
from .univariate import (
    LatentPath,
    SamplerError,
    SvParams,
    draw_latent_awol,
    draw_sv_params_asis,
    linearize_observations,
)

__all__ = [
    "FsvConfig",
    "FsvDraws",
    "RunningMoments",
    "free_elements",
    "preorder",
    "find_restrict",
    "fsv_sample",
    "simulate_fsv",
    "draw_shrinkage_latents",
    "covmat",
    "predcov",
    "predcor",
    "predloglik",
    "evdiag",
]

RUNNING_QUANTITIES = ("logvar", "factors", "volatilities", "cov", "cor", "com")


def free_elements(m: int, r: int | None = None) -> int:
    """Free elements of the time-t covariance matrix, with or without a
    rank-r factor decomposition."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if r is None:
        return m * (m + 1) // 2
    if not 0 < r < m:
        raise ValueError("need 0 < r < m")
    return m * (r + 1) - r * (r - 1) // 2


@dataclass
class FsvConfig:
    """Configuration of the factor SV sampler (defaults follow the batch
    interface conventions: few draws, last-time latent storage)."""

    factors: int = 1
    draws: int = 1000
    burnin: int = 1000
    thin: int = 1
    zeromean: bool = True
    keeptime: str = "last"  # "all" or "last"
    restrict: str | np.ndarray = "none"  # "none" | "upper" | "auto" | bool matrix
    priorfacloadtype: str = "normal"  # "normal" | "rowwiseng" | "colwiseng"
    priorfacload: float | np.ndarray = 1.0  # sd tau for "normal", shrinkage a for NG
    priorng: tuple = (1.0, 1.0)  # (c, d) of the global shrinkage Gamma prior
    priormu: tuple = (0.0, 10.0)
    priorphiidi: tuple = (5.0, 1.5)
    priorphifac: tuple = (5.0, 1.5)
    priorsigmaidi: float = 1.0
    priorsigmafac: float = 1.0
    priorbeta: tuple = (0.0, 10000.0)
    samplefac: bool = True
    observed_factors: np.ndarray | None = None  # (n, r), used when samplefac=False
    runningstore: int = 6
    runningstorethin: int = 10
    runningstoremoments: int = 2
    interweaving: str = "both"  # "none" | "shallow" | "deep" | "both"
    seed: int = 1
    offset: float = 1e-8


@dataclass
class RunningMoments:
    """Online first/second ergodic moments of derived time-path quantities.

    ``level`` selects a cumulative subset of (logvar, factors, volatilities,
    cov, cor, com); volatilities are the marginal conditional standard
    deviations sqrt(diag Sigma_t).
    """

    level: int
    moments: int
    thin: int
    count: int = 0
    sums: dict = field(default_factory=dict)
    sums2: dict = field(default_factory=dict)

    def tracked(self) -> list[str]:
        return list(RUNNING_QUANTITIES[: self.level])

    def _acc(self, name: str, value: np.ndarray):
        if name not in self.sums:
            self.sums[name] = np.zeros_like(value)
            if self.moments >= 2:
                self.sums2[name] = np.zeros_like(value)
        self.sums[name] += value
        if self.moments >= 2:
            self.sums2[name] += value * value

    def update(self, h_idi: np.ndarray, h_fac: np.ndarray, facload: np.ndarray, f: np.ndarray, beta):
        self.count += 1
        if self.level >= 1:
            self._acc("logvar", np.concatenate([h_idi, h_fac], axis=1))
        if self.level >= 2:
            self._acc("factors", f.T)
        if self.level >= 3:
            fac_var = np.exp(h_fac) @ (facload.T**2)  # (n, m) common part of diag
            diag = fac_var + np.exp(h_idi)
            self._acc("volatilities", np.sqrt(diag))
        if self.level >= 4:
            cov = np.einsum("ij,tj,kj->tik", facload, np.exp(h_fac), facload)
            cov[:, np.arange(h_idi.shape[1]), np.arange(h_idi.shape[1])] += np.exp(h_idi)
            self._acc("cov", cov)
            if self.level >= 5:
                sd = np.sqrt(np.einsum("tii->ti", cov))
                self._acc("cor", cov / sd[:, :, None] / sd[:, None, :])
            if self.level >= 6:
                fac_var = np.einsum("ij,tj,ij->ti", facload, np.exp(h_fac), facload)
                self._acc("com", fac_var / np.einsum("tii->ti", cov))

    def mean(self, name: str) -> np.ndarray:
        if name not in self.sums:
            raise KeyError(f"{name!r} was not tracked (level {self.level})")
        return self.sums[name] / self.count

    def sd(self, name: str) -> np.ndarray:
        if self.moments < 2:
            raise ValueError("second moments were not stored")
        m = self.mean(name)
        return np.sqrt(np.maximum(self.sums2[name] / self.count - m * m, 0.0))


@dataclass
class FsvDraws:
    """Stored factor-model chains; latent paths are (kept, times, series)."""

    facload: np.ndarray  # (kept, m, r)
    factors: np.ndarray  # (kept, r, times)
    idi_logvar: np.ndarray  # (kept, times, m)
    fac_logvar: np.ndarray  # (kept, times, r)
    idi_params: np.ndarray  # (kept, m, 3): mu, phi, sigma
    fac_params: np.ndarray  # (kept, r, 2): phi, sigma
    beta: np.ndarray | None  # (kept, m)
    tau2: np.ndarray | None  # (kept, m, r)
    lambda2: np.ndarray | None  # (kept, m) rowwise or (kept, r) colwise
    running: RunningMoments
    restrict_mask: np.ndarray  # (m, r) True = fixed to zero
    config: FsvConfig
    y: np.ndarray

    @property
    def kept(self) -> int:
        return self.facload.shape[0]

    @property
    def m(self) -> int:
        return self.facload.shape[1]

    @property
    def r(self) -> int:
        return self.facload.shape[2]

    @property
    def n(self) -> int:
        return self.y.shape[0]


# ---------------------------------------------------------------------------
# static factor analysis helpers (identification)


def _varimax(loadings: np.ndarray, max_iter: int = 200, tol: float = 1e-10) -> np.ndarray:
    m, r = loadings.shape
    if r < 2:
        return loadings
    rot = np.eye(r)
    score = 0.0
    for _ in range(max_iter):
        lam = loadings @ rot
        u, s, vt = np.linalg.svd(
            loadings.T @ (lam**3 - lam @ np.diag(np.sum(lam**2, axis=0)) / m)
        )
        rot_new = u @ vt
        score_new = s.sum()
        if score_new <= score * (1.0 + tol):
            break
        rot, score = rot_new, score_new
    return loadings @ rot


def _static_loadings(Y: np.ndarray, r: int, iters: int = 100) -> np.ndarray:
    """Principal-axis factoring with a varimax rotation.

    A light-weight stand-in for a full maximum-likelihood factor analysis;
    used only to order series and choose identification restrictions.
    """
    Y = np.asarray(Y, dtype=float)
    n, m = Y.shape
    if not 0 < r < m:
        raise ValueError("need 0 < factors < m")
    corr = np.corrcoef(Y.T)
    if not np.all(np.isfinite(corr)):
        raise ValueError("degenerate covariance: constant column or too few rows")
    try:
        comm = 1.0 - 1.0 / np.diag(np.linalg.inv(corr))
    except np.linalg.LinAlgError:
        off = corr - np.eye(m)
        comm = np.max(np.abs(off), axis=1)
    comm = np.clip(comm, 0.05, 0.995)
    load = None
    for _ in range(iters):
        reduced = corr.copy()
        np.fill_diagonal(reduced, comm)
        vals, vecs = np.linalg.eigh(reduced)
        idx = np.argsort(vals)[::-1][:r]
        load = vecs[:, idx] * np.sqrt(np.clip(vals[idx], 1e-12, None))
        new_comm = np.clip((load**2).sum(axis=1), 1e-6, 0.999)
        if np.max(np.abs(new_comm - comm)) < 1e-8:
            comm = new_comm
            break
        comm = new_comm
    # rotate, order factors by explained variance, orient dominant loadings up
    load = _varimax(load)
    order = np.argsort(-np.sum(load**2, axis=0))
    load = load[:, order]
    signs = np.sign(load[np.argmax(np.abs(load), axis=0), np.arange(r)])
    signs[signs == 0] = 1.0
    return load * signs


def preorder(Y: np.ndarray, factors: int) -> np.ndarray:
    """Ordering of the series for a lower-triangular identification: the
    variable loading most heavily on factor j (among those not yet placed)
    is put in position j, the rest keep their original order.  Returns
    0-based column indices."""
    load = _static_loadings(Y, factors)
    m = load.shape[0]
    placed: list[int] = []
    for j in range(factors):
        order = np.argsort(-np.abs(load[:, j]))
        for i in order:
            if i not in placed:
                placed.append(int(i))
                break
    rest = [i for i in range(m) if i not in placed]
    return np.array(placed + rest, dtype=int)


def find_restrict(Y: np.ndarray, factors: int) -> np.ndarray:
    """Order-free identification mask: the leader of factor k (the series
    with the relatively smallest loadings on the later factors) gets its
    entries in columns k+1..r restricted to zero.  True means restricted."""
    load = _static_loadings(Y, factors)
    m, r = load.shape
    mask = np.zeros((m, r), dtype=bool)
    available = list(range(m))
    for k in range(r - 1):
        later = np.sqrt((load[available, k + 1 :] ** 2).sum(axis=1))
        early = np.sqrt((load[available, : k + 1] ** 2).sum(axis=1))
        score = later / np.maximum(early, 1e-12)
        leader = available[int(np.argmin(score))]
        mask[leader, k + 1 :] = True
        available.remove(leader)
    return mask


def _resolve_restrict(restrict, Y, m: int, r: int) -> np.ndarray:
    if isinstance(restrict, str):
        if restrict == "none":
            return np.zeros((m, r), dtype=bool)
        if restrict == "upper":
            return np.triu(np.ones((m, r), dtype=bool), k=1)
        if restrict == "auto":
            return find_restrict(Y, r)
        raise ValueError(f"unknown restrict {restrict!r}")
    mask = np.asarray(restrict, dtype=bool)
    if mask.shape != (m, r):
        raise ValueError(f"restrict matrix must be ({m}, {r})")
    if np.any(mask.all(axis=0)):
        raise ValueError("restrict matrix has a fully restricted column")
    return mask


# ---------------------------------------------------------------------------
# simulation


def simulate_fsv(
    facload: np.ndarray,
    n: int,
    idi_params: list[SvParams] | None = None,
    fac_params: list[SvParams] | None = None,
    beta: np.ndarray | None = None,
    rng=None,
):
    """Generate (Y, f, h_idi, h_fac) from the factor SV equations."""
    from .univariate import simulate_sv

    rng = rng.generator() if isinstance(rng, RngStream) else rng
    facload = np.asarray(facload, dtype=float)
    m, r = facload.shape
    if idi_params is None:
        idi_params = [SvParams(-1.0, 0.95, 0.3) for _ in range(m)]
    if fac_params is None:
        fac_params = [SvParams(0.0, 0.95, 0.3) for _ in range(r)]
    h_idi = np.empty((n, m))
    h_fac = np.empty((n, r))
    f = np.empty((r, n))
    for j, pars in enumerate(fac_params):
        if pars.mu != 0.0:
            raise ValueError("factor log-variance levels are fixed at zero")
        _, _, h, _ = simulate_sv("sv", pars, n, None, rng)
        h_fac[:, j] = h
        f[j] = np.exp(h / 2.0) * rng.standard_normal(n)
    e = np.empty((n, m))
    for i, pars in enumerate(idi_params):
        _, _, h, _ = simulate_sv("sv", pars, n, None, rng)
        h_idi[:, i] = h
        e[:, i] = np.exp(h / 2.0) * rng.standard_normal(n)
    Y = f.T @ facload.T + e
    if beta is not None:
        Y = Y + np.asarray(beta, dtype=float)
    return Y, f, h_idi, h_fac


# ---------------------------------------------------------------------------
# sampler pieces


def draw_shrinkage_latents(
    facload: np.ndarray,
    restrict_mask: np.ndarray,
    kind: str,
    a: float,
    c: float,
    d: float,
    lambda2: np.ndarray,
    rng,
) -> tuple[np.ndarray, np.ndarray]:
    """Gibbs updates of the normal-gamma latents.

    tau2_ij | . is generalized inverse Gaussian for free loadings and falls
    back to its Gamma prior for restricted (structurally zero) entries;
    lambda2 | . is Gamma with shape c + a * (row or column count).
    """
    m, r = facload.shape
    if kind == "rowwiseng":
        lam_grid = np.repeat(lambda2[:, None], r, axis=1)
    elif kind == "colwiseng":
        lam_grid = np.repeat(lambda2[None, :], m, axis=0)
    else:
        raise ValueError(f"not a normal-gamma prior: {kind!r}")
    tau2 = np.empty((m, r))
    free = ~restrict_mask
    if np.any(free):
        tau2[free] = draw_gig(
            a - 0.5, facload[free] ** 2, a * lam_grid[free], rng
        )
    if np.any(restrict_mask):
        g = rng if isinstance(rng, np.random.Generator) else rng.generator()
        shape = np.full(int(restrict_mask.sum()), a)
        tau2[restrict_mask] = g.gamma(shape, 2.0 / (a * lam_grid[restrict_mask]))
    g = rng if isinstance(rng, np.random.Generator) else rng.generator()
    if kind == "rowwiseng":
        lambda2_new = g.gamma(c + a * r, 1.0 / (d + 0.5 * a * tau2.sum(axis=1)))
    else:
        lambda2_new = g.gamma(c + a * m, 1.0 / (d + 0.5 * a * tau2.sum(axis=0)))
    return tau2, lambda2_new


def _draw_factors(Y_c, facload, h_idi, h_fac, rng):
    """Conditionally normal joint draw of all factor vectors."""
    n, m = Y_c.shape
    r = facload.shape[1]
    w = np.exp(-h_idi)  # (n, m)
    prec = np.einsum("ji,tj,jk->tik", facload, w, facload)
    prec[:, np.arange(r), np.arange(r)] += np.exp(-h_fac)
    lin = np.einsum("ji,tj->ti", facload, w * Y_c)
    ell = np.linalg.cholesky(prec)
    z = rng.standard_normal((n, r))
    w1 = np.linalg.solve(ell, lin[:, :, None])[:, :, 0]
    f = np.linalg.solve(np.transpose(ell, (0, 2, 1)), (w1 + z)[:, :, None])[:, :, 0]
    return f  # (n, r)


def _draw_loadings(Y_c, f, h_idi, tau2, restrict_mask, rng):
    n, m = Y_c.shape
    r = f.shape[1]
    facload = np.zeros((m, r))
    for i in range(m):
        free = ~restrict_mask[i]
        k = int(free.sum())
        if k == 0:
            continue
        Xf = f[:, free]
        w = np.exp(-h_idi[:, i])
        prec = (Xf.T * w) @ Xf + np.diag(1.0 / tau2[i, free])
        lin = Xf.T @ (w * Y_c[:, i])
        ell = np.linalg.cholesky(prec)
        w1 = np.linalg.solve(ell, lin)
        facload[i, free] = np.linalg.solve(ell.T, w1 + rng.standard_normal(k))
    return facload


def _univariate_sv_update(e, h0, h, params: SvParams, priors: PriorSpec, table, rng, offset):
    ystar = linearize_observations(e, None, offset)
    s = draw_indicators(ystar, h, table, rng)
    latent = draw_latent_awol(ystar, s, params, table, rng, priors.latent0_variance)
    params, latent = draw_sv_params_asis(latent, ystar, s, params, priors, rng, table)
    return latent.h0, latent.h, params


def _deep_interweave(facload_col, f_col, h0, h, phi, sigma, tau2_col, rng):
    """Shift the factor log-variance level against the loadings scale.

    Gibbs move along the scale orbit lambda -> lambda e^{-g/2},
    f -> f e^{g/2}, h -> h + g with a Gaussian proposal from the AR part and
    an MH correction for the loadings prior."""
    n = h.shape[0]
    sig2 = sigma * sigma
    mj = facload_col.shape[0]
    a_quad = ((1.0 - phi * phi) + n * (1.0 - phi) ** 2) / sig2
    hh = np.concatenate(([h0], h))
    b_lin = ((1.0 - phi * phi) * h0 + (1.0 - phi) * float(np.sum(hh[1:] - phi * hh[:-1]))) / sig2
    c_load = float(np.sum(facload_col**2 / tau2_col)) if mj else 0.0
    mean_q = -(b_lin + mj / 2.0) / a_quad
    gamma = mean_q + math.sqrt(1.0 / a_quad) * rng.standard_normal()
    if c_load > 0.0 and gamma < -60.0:
        log_acc = -math.inf  # exp(-gamma) astronomically large: certain rejection
    else:
        log_acc = -0.5 * c_load * (math.exp(-gamma) - 1.0)
    if math.log(rng.random()) < log_acc:
        scale = math.exp(-gamma / 2.0)
        return facload_col * scale, f_col / scale, h0 + gamma, h + gamma, True
    return facload_col, f_col, h0, h, False


def _shallow_interweave(facload_col, f_col, h, tau2_col, rng):
    """Exact GIG rescaling of the loadings column against the factors."""
    n = h.shape[0]
    mj = facload_col.shape[0]
    c1 = float(np.sum(facload_col**2 / tau2_col)) if mj else 0.0
    c2 = float(np.sum(f_col * f_col * np.exp(-h)))
    omega = draw_gig((n - mj + 1) / 2.0, c1, c2, rng)
    c = math.sqrt(omega)
    return facload_col / c, f_col * c


# ---------------------------------------------------------------------------
# main sampler


@dataclass
class _FsvState:
    facload: np.ndarray
    f: np.ndarray  # (n, r)
    h_idi: np.ndarray  # (n, m)
    h0_idi: np.ndarray
    h_fac: np.ndarray  # (n, r)
    h0_fac: np.ndarray
    idi_params: list
    fac_params: list
    beta: np.ndarray
    tau2: np.ndarray
    lambda2: np.ndarray


def _build_priors(cfg: FsvConfig):
    dummy_beta = None
    idi = PriorSpec(
        mu=Normal(cfg.priormu[0], cfg.priormu[1]),
        phi=TranslatedBeta(cfg.priorphiidi[0], cfg.priorphiidi[1]),
        sigma2=Gamma(0.5, 0.5 / cfg.priorsigmaidi),
        nu=Infinity(),
        rho=Constant(0.0),
        beta=_beta_placeholder(),
        latent0_variance="stationary",
    )
    fac = PriorSpec(
        mu=Constant(0.0),
        phi=TranslatedBeta(cfg.priorphifac[0], cfg.priorphifac[1]),
        sigma2=Gamma(0.5, 0.5 / cfg.priorsigmafac),
        nu=Infinity(),
        rho=Constant(0.0),
        beta=_beta_placeholder(),
        latent0_variance="stationary",
    )
    return idi, fac


def _beta_placeholder():
    from .distributions import MultivariateNormal

    return MultivariateNormal.isotropic(0.0, 1.0, 1)


def _normal_tau2(cfg: FsvConfig, m: int, r: int) -> np.ndarray:
    val = np.asarray(cfg.priorfacload, dtype=float)
    if val.ndim == 0:
        return np.full((m, r), float(val) ** 2)
    if val.shape != (m, r):
        raise ValueError(f"priorfacload matrix must be ({m}, {r})")
    return val**2


def _init_state(Y, cfg: FsvConfig, rng) -> _FsvState:
    n, m = Y.shape
    r = cfg.factors
    mu0 = np.log(np.var(Y, axis=0) + 1e-12)
    idi_params = [SvParams(float(mu0[i]), 0.9, 0.3) for i in range(m)]
    fac_params = [SvParams(0.0, 0.9, 0.3) for _ in range(r)]
    if cfg.samplefac:
        f = 0.1 * rng.standard_normal((n, r))
    else:
        if cfg.observed_factors is None:
            raise ValueError("samplefac=False requires observed_factors")
        f = np.asarray(cfg.observed_factors, dtype=float)
        if f.shape != (n, r):
            raise ValueError(f"observed_factors must be ({n}, {r})")
    ng = cfg.priorfacloadtype in ("rowwiseng", "colwiseng")
    lambda2 = np.ones(m if cfg.priorfacloadtype == "rowwiseng" else r)
    if ng:
        a = float(cfg.priorfacload)
        tau2 = np.full((m, r), 2.0 / max(a, 1e-12))
    else:
        tau2 = _normal_tau2(cfg, m, r)
    return _FsvState(
        facload=np.zeros((m, r)),
        f=f,
        h_idi=np.tile(mu0, (n, 1)),
        h0_idi=mu0.copy(),
        h_fac=np.zeros((n, r)),
        h0_fac=np.zeros(r),
        idi_params=idi_params,
        fac_params=fac_params,
        beta=np.zeros(m),
        tau2=tau2,
        lambda2=lambda2,
    )


def _fsv_sweep(state: _FsvState, Y, cfg: FsvConfig, mask, idi_pri, fac_pri, table, rng):
    n, m = Y.shape
    r = cfg.factors
    ng = cfg.priorfacloadtype in ("rowwiseng", "colwiseng")
    Y_c = Y - state.beta if not cfg.zeromean else Y

    if cfg.samplefac:
        state.f = _draw_factors(Y_c, state.facload, state.h_idi, state.h_fac, rng)
    state.facload = _draw_loadings(Y_c, state.f, state.h_idi, state.tau2, mask, rng)
    if ng:
        state.tau2, state.lambda2 = draw_shrinkage_latents(
            state.facload, mask, cfg.priorfacloadtype, float(cfg.priorfacload),
            cfg.priorng[0], cfg.priorng[1], state.lambda2, rng,
        )

    common = state.f @ state.facload.T  # (n, m)
    resid = Y_c - common
    for i in range(m):
        h0, h, pars = _univariate_sv_update(
            resid[:, i], state.h0_idi[i], state.h_idi[:, i], state.idi_params[i],
            idi_pri, table, rng, cfg.offset,
        )
        state.h0_idi[i], state.h_idi[:, i], state.idi_params[i] = h0, h, pars
    for j in range(r):
        h0, h, pars = _univariate_sv_update(
            state.f[:, j], state.h0_fac[j], state.h_fac[:, j], state.fac_params[j],
            fac_pri, table, rng, cfg.offset,
        )
        state.h0_fac[j], state.h_fac[:, j], state.fac_params[j] = h0, h, pars

    if not cfg.zeromean:
        resid_b = Y - state.f @ state.facload.T
        w = np.exp(-state.h_idi)  # (n, m)
        b0, s0 = cfg.priorbeta
        prec = w.sum(axis=0) + 1.0 / s0**2
        lin = np.sum(w * resid_b, axis=0) + b0 / s0**2
        state.beta = lin / prec + np.sqrt(1.0 / prec) * rng.standard_normal(m)

    if cfg.samplefac and cfg.interweaving != "none":
        for j in range(r):
            free = ~mask[:, j]
            pars = state.fac_params[j]
            if cfg.interweaving in ("deep", "both"):
                lam, f_col, h0, h, _ = _deep_interweave(
                    state.facload[free, j], state.f[:, j], state.h0_fac[j],
                    state.h_fac[:, j], pars.phi, pars.sigma, state.tau2[free, j], rng,
                )
                state.facload[free, j] = lam
                state.f[:, j] = f_col
                state.h0_fac[j], state.h_fac[:, j] = h0, h
            if cfg.interweaving in ("shallow", "both"):
                lam, f_col = _shallow_interweave(
                    state.facload[free, j], state.f[:, j], state.h_fac[:, j],
                    state.tau2[free, j], rng,
                )
                state.facload[free, j] = lam
                state.f[:, j] = f_col


def fsv_sample(Y: np.ndarray, config: FsvConfig | None = None) -> FsvDraws:
    """Run the factor SV sampler on the (n, m) data matrix."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[0] < 2:
        raise ValueError("Y must be an (n, m) matrix with n >= 2")
    if not np.all(np.isfinite(Y)):
        raise ValueError("Y must be finite")
    cfg = config if config is not None else FsvConfig()
    n, m = Y.shape
    r = cfg.factors
    if not 1 <= r < m:
        raise ValueError("need 1 <= factors < m")
    if cfg.keeptime not in ("all", "last"):
        raise ValueError('keeptime must be "all" or "last"')
    mask = _resolve_restrict(cfg.restrict, Y, m, r)
    idi_pri, fac_pri = _build_priors(cfg)
    table = mixture_table()
    rng = RngStream(cfg.seed, 0).generator()
    state = _init_state(Y, cfg, rng)

    kept = -(-cfg.draws // cfg.thin)
    times = n if cfg.keeptime == "all" else 1
    ng = cfg.priorfacloadtype in ("rowwiseng", "colwiseng")
    out = FsvDraws(
        facload=np.empty((kept, m, r)),
        factors=np.empty((kept, r, times)),
        idi_logvar=np.empty((kept, times, m)),
        fac_logvar=np.empty((kept, times, r)),
        idi_params=np.empty((kept, m, 3)),
        fac_params=np.empty((kept, r, 2)),
        beta=None if cfg.zeromean else np.empty((kept, m)),
        tau2=np.empty((kept, m, r)) if ng else None,
        lambda2=np.empty((kept, state.lambda2.shape[0])) if ng else None,
        running=RunningMoments(cfg.runningstore, cfg.runningstoremoments, cfg.runningstorethin),
        restrict_mask=mask,
        config=cfg,
        y=Y,
    )

    for sweep_idx in range(cfg.burnin + cfg.draws):
        try:
            _fsv_sweep(state, Y, cfg, mask, idi_pri, fac_pri, table, rng)
        except Exception as exc:
            raise SamplerError(f"sweep {sweep_idx}: {exc}") from exc
        post = sweep_idx - cfg.burnin
        if post < 0:
            continue
        if post % cfg.runningstorethin == 0 and cfg.runningstore > 0:
            out.running.update(
                state.h_idi, state.h_fac, state.facload, state.f.T, state.beta
            )
        if post % cfg.thin != 0:
            continue
        jdx = post // cfg.thin
        sel = slice(None) if cfg.keeptime == "all" else slice(n - 1, n)
        out.facload[jdx] = state.facload
        out.factors[jdx] = state.f[sel].T
        out.idi_logvar[jdx] = state.h_idi[sel]
        out.fac_logvar[jdx] = state.h_fac[sel]
        for i in range(m):
            p = state.idi_params[i]
            out.idi_params[jdx, i] = (p.mu, p.phi, p.sigma)
        for j in range(r):
            p = state.fac_params[j]
            out.fac_params[jdx, j] = (p.phi, p.sigma)
        if out.beta is not None:
            out.beta[jdx] = state.beta
        if ng:
            out.tau2[jdx] = state.tau2
            out.lambda2[jdx] = state.lambda2
    return out


# ---------------------------------------------------------------------------
# posterior functionals


def covmat(draws: FsvDraws, these=None) -> np.ndarray:
    """Model-implied covariance draws, shape (m, m, kept, times)."""
    times = draws.idi_logvar.shape[1]
    sel = np.arange(times) if these is None else np.atleast_1d(np.asarray(these, dtype=int))
    if np.any(sel < 0) or np.any(sel >= times):
        raise ValueError(f"requested timepoint was not stored (0..{times - 1})")
    lam = draws.facload  # (kept, m, r)
    hf = draws.fac_logvar[:, sel, :]  # (kept, T, r)
    hi = draws.idi_logvar[:, sel, :]  # (kept, T, m)
    cov = np.einsum("kir,ktr,kjr->ijkt", lam, np.exp(hf), lam)
    i = np.arange(draws.m)
    cov[i, i] += np.transpose(np.exp(hi), (2, 0, 1))
    return cov


def evdiag(draws: FsvDraws) -> np.ndarray:
    """Mean over draws of the descending eigenvalues of Lambda' Lambda."""
    gram = np.einsum("kir,kis->krs", draws.facload, draws.facload)
    vals = np.linalg.eigvalsh(gram)[:, ::-1]
    return vals.mean(axis=0)


def _propagate(draws: FsvDraws, ahead: np.ndarray, each: int, rng):
    """Propagate all log-variance processes forward; returns per-draw
    (idi (reps, H, m), fac (reps, H, r)) with reps = kept * each."""
    kept, m, r = draws.kept, draws.m, draws.r
    reps = kept * each
    idx = np.repeat(np.arange(kept), each)
    h_i = draws.idi_logvar[idx, -1, :]  # (reps, m)
    h_f = draws.fac_logvar[idx, -1, :]
    mu_i = draws.idi_params[idx, :, 0]
    phi_i = draws.idi_params[idx, :, 1]
    sig_i = draws.idi_params[idx, :, 2]
    phi_f = draws.fac_params[idx, :, 0]
    sig_f = draws.fac_params[idx, :, 1]
    hmax = int(np.max(ahead))
    out_i = np.empty((reps, hmax, m))
    out_f = np.empty((reps, hmax, r))
    for k in range(hmax):
        h_i = mu_i + phi_i * (h_i - mu_i) + sig_i * rng.standard_normal((reps, m))
        h_f = phi_f * h_f + sig_f * rng.standard_normal((reps, r))
        out_i[:, k] = h_i
        out_f[:, k] = h_f
    return idx, out_i, out_f


def predcov(draws: FsvDraws, ahead=1, each: int = 1, rng=None) -> np.ndarray:
    """Posterior-predictive covariance draws, shape (m, m, kept*each, len(ahead))."""
    ahead = np.atleast_1d(np.asarray(ahead, dtype=int))
    if np.any(ahead < 1):
        raise ValueError("ahead must be >= 1")
    rng = rng if rng is not None else RngStream(draws.config.seed, 1 << 20).generator()
    idx, h_i, h_f = _propagate(draws, ahead, each, rng)
    lam = draws.facload[idx]  # (reps, m, r)
    sel = ahead - 1
    cov = np.einsum("kir,ktr,kjr->ijkt", lam, np.exp(h_f[:, sel, :]), lam)
    i = np.arange(draws.m)
    cov[i, i] += np.transpose(np.exp(h_i[:, sel, :]), (2, 0, 1))
    return cov


def predcor(draws: FsvDraws, ahead=1, each: int = 1, rng=None) -> np.ndarray:
    cov = predcov(draws, ahead, each, rng)
    sd = np.sqrt(np.einsum("iikt->ikt", cov))
    return cov / sd[:, None, :, :] / sd[None, :, :, :]


def predloglik(draws: FsvDraws, ynew: np.ndarray, ahead=1, each: int = 1, rng=None) -> np.ndarray:
    """Log predictive scores of new observation vectors, one per horizon.

    Averages the factor-integrated Gaussian density N(beta, Lambda Sigma_f
    Lambda' + Sigma_idi) over kept draws (times ``each`` fresh log-variance
    paths per draw) and returns the log of the average.
    """
    from scipy.special import logsumexp

    ynew = np.atleast_2d(np.asarray(ynew, dtype=float))
    ahead = np.atleast_1d(np.asarray(ahead, dtype=int))
    if ynew.shape != (ahead.shape[0], draws.m):
        raise ValueError(f"ynew must be ({ahead.shape[0]}, {draws.m})")
    cov = predcov(draws, ahead, each, rng)  # (m, m, reps, H)
    reps = cov.shape[2]
    beta = draws.beta if draws.beta is not None else None
    out = np.empty(ahead.shape[0])
    for t in range(ahead.shape[0]):
        c = np.transpose(cov[:, :, :, t], (2, 0, 1))  # (reps, m, m)
        ell = np.linalg.cholesky(c)
        resid = ynew[t][None, :] - (
            np.repeat(beta, each, axis=0) if beta is not None else 0.0
        )
        sol = np.linalg.solve(ell, np.broadcast_to(resid, (reps, draws.m))[:, :, None])[:, :, 0]
        quad = np.sum(sol * sol, axis=1)
        logdet = 2.0 * np.sum(np.log(np.einsum("kii->ki", ell)), axis=1)
        terms = -0.5 * (draws.m * math.log(2.0 * math.pi) + logdet + quad)
        out[t] = logsumexp(terms) - math.log(reps)
    return out
