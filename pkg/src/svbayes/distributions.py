"""Random variates, log densities, and CDFs for the prior and sampler machinery.

Distribution objects are small frozen dataclasses; all randomness flows
through numpy Generators owned by an :class:`RngStream`, so that every chain
gets its own reproducible, statistically independent stream.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import special, stats

__all__ = [
    "InvalidParameterError",
    "UnsupportedDrawError",
    "RngStream",
    "Normal",
    "Beta",
    "TranslatedBeta",
    "Gamma",
    "InverseGamma",
    "Exponential",
    "Constant",
    "Infinity",
    "MultivariateNormal",
    "draw",
    "log_density",
    "cdf",
    "dist_mean",
    "draw_gig",
    "draw_student_t",
]

_LOG_2PI = math.log(2.0 * math.pi)


class InvalidParameterError(ValueError):
    """Distribution parameters violate their domain (sd <= 0, shape <= 0, ...)."""


class UnsupportedDrawError(ValueError):
    """Raised when asked for variates of a distribution that has none."""


@dataclass
class RngStream:
    """Seedable, stream-splittable source of randomness.

    Uses the counter-based Philox generator keyed by ``(seed, stream)``:
    identical pairs reproduce identical variate sequences, distinct stream
    ids give statistically independent streams.  The underlying Generator is
    single-owner mutable state: one stream per chain, never shared.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        if not hasattr(self, "_gen"):
            key = np.array([self.seed % 2**64, self.stream % 2**64], dtype=np.uint64)
            self._gen = np.random.Generator(np.random.Philox(key=key))
        return self._gen

    def child(self, stream: int) -> "RngStream":
        """Fresh stream with the same seed; used for chains/windows."""
        return RngStream(self.seed, stream)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


@dataclass(frozen=True)
class Normal:
    mean: float
    sd: float

    def __post_init__(self):
        if not self.sd > 0:
            raise InvalidParameterError(f"Normal sd must be > 0, got {self.sd}")

    def draw(self, rng, size=None):
        return _as_generator(rng).normal(self.mean, self.sd, size=size)

    def log_density(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.sd
        return -0.5 * z * z - math.log(self.sd) - 0.5 * _LOG_2PI

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=float) - self.mean) / self.sd)

    @property
    def dist_mean(self) -> float:
        return self.mean


@dataclass(frozen=True)
class Beta:
    """Beta on (0, 1)."""

    shape1: float
    shape2: float

    def __post_init__(self):
        if not (self.shape1 > 0 and self.shape2 > 0):
            raise InvalidParameterError("Beta shapes must be > 0")

    def draw(self, rng, size=None):
        return _as_generator(rng).beta(self.shape1, self.shape2, size=size)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (
                (self.shape1 - 1.0) * np.log(x)
                + (self.shape2 - 1.0) * np.log1p(-x)
                - special.betaln(self.shape1, self.shape2)
            )
        return np.where((x > 0) & (x < 1), out, -np.inf)

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return special.betainc(self.shape1, self.shape2, x)

    @property
    def dist_mean(self) -> float:
        return self.shape1 / (self.shape1 + self.shape2)


@dataclass(frozen=True)
class TranslatedBeta:
    """Beta stretched to the open interval (-1, 1): x = 2 b - 1, b ~ Beta."""

    shape1: float
    shape2: float

    def __post_init__(self):
        if not (self.shape1 > 0 and self.shape2 > 0):
            raise InvalidParameterError("TranslatedBeta shapes must be > 0")

    def _base(self) -> Beta:
        return Beta(self.shape1, self.shape2)

    def draw(self, rng, size=None):
        return 2.0 * _as_generator(rng).beta(self.shape1, self.shape2, size=size) - 1.0

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        return self._base().log_density((x + 1.0) / 2.0) - math.log(2.0)

    def cdf(self, x):
        return self._base().cdf((np.asarray(x, dtype=float) + 1.0) / 2.0)

    @property
    def dist_mean(self) -> float:
        return 2.0 * self.shape1 / (self.shape1 + self.shape2) - 1.0


@dataclass(frozen=True)
class Gamma:
    """Gamma with shape/rate parameterization."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise InvalidParameterError("Gamma shape and rate must be > 0")

    def draw(self, rng, size=None):
        return _as_generator(rng).gamma(self.shape, 1.0 / self.rate, size=size)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (
                self.shape * math.log(self.rate)
                + (self.shape - 1.0) * np.log(x)
                - self.rate * x
                - special.gammaln(self.shape)
            )
        return np.where(x > 0, out, -np.inf)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return special.gammainc(self.shape, self.rate * np.clip(x, 0.0, None))

    @property
    def dist_mean(self) -> float:
        return self.shape / self.rate


@dataclass(frozen=True)
class InverseGamma:
    """Inverse gamma with shape/scale parameterization: 1/x ~ Gamma(shape, scale)."""

    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise InvalidParameterError("InverseGamma shape and scale must be > 0")

    def draw(self, rng, size=None):
        return self.scale / _as_generator(rng).gamma(self.shape, 1.0, size=size)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (
                self.shape * math.log(self.scale)
                - special.gammaln(self.shape)
                - (self.shape + 1.0) * np.log(x)
                - self.scale / x
            )
        return np.where(x > 0, out, -np.inf)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = special.gammaincc(self.shape, self.scale / x)
        return np.where(x > 0, out, 0.0)

    @property
    def dist_mean(self) -> float:
        if self.shape <= 1:
            return math.inf
        return self.scale / (self.shape - 1.0)


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise InvalidParameterError("Exponential rate must be > 0")

    def draw(self, rng, size=None):
        return _as_generator(rng).exponential(1.0 / self.rate, size=size)

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, math.log(self.rate) - self.rate * x, -np.inf)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, -np.expm1(-self.rate * x), 0.0)

    @property
    def dist_mean(self) -> float:
        return 1.0 / self.rate


@dataclass(frozen=True)
class Constant:
    """Point mass: drawing returns the fixed value, samplers skip its update."""

    value: float

    def draw(self, rng, size=None):
        if size is None:
            return self.value
        return np.full(size, self.value)

    def log_density(self, x):
        # Convention for the degenerate case: 0 at the atom, -inf elsewhere.
        x = np.asarray(x, dtype=float)
        return np.where(x == self.value, 0.0, -np.inf)

    def cdf(self, x):
        return np.where(np.asarray(x, dtype=float) >= self.value, 1.0, 0.0)

    @property
    def dist_mean(self) -> float:
        return self.value


@dataclass(frozen=True)
class Infinity:
    """A placeholder for a parameter fixed at +infinity (Gaussian-error limit)."""

    def draw(self, rng, size=None):
        raise UnsupportedDrawError("cannot draw variates from Infinity")

    def log_density(self, x):
        raise UnsupportedDrawError("Infinity has no density")

    def cdf(self, x):
        raise UnsupportedDrawError("Infinity has no CDF")

    @property
    def dist_mean(self) -> float:
        return math.inf


@dataclass(frozen=True)
class MultivariateNormal:
    """Multivariate normal given either a covariance or a precision matrix."""

    mean: np.ndarray
    cov: np.ndarray | None = None
    precision: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=float)))
        if (self.cov is None) == (self.precision is None):
            raise InvalidParameterError("give exactly one of cov and precision")
        mat = self.cov if self.cov is not None else self.precision
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        if mat.shape != (self.dim, self.dim):
            raise InvalidParameterError("matrix shape does not match mean length")
        if not np.allclose(mat, mat.T):
            raise InvalidParameterError("matrix must be symmetric")
        try:
            np.linalg.cholesky(mat)
        except np.linalg.LinAlgError as exc:
            raise InvalidParameterError("matrix must be positive definite") from exc
        if self.cov is not None:
            object.__setattr__(self, "cov", mat)
        else:
            object.__setattr__(self, "precision", mat)

    @classmethod
    def isotropic(cls, mean: float, sd: float, dim: int) -> "MultivariateNormal":
        if not sd > 0:
            raise InvalidParameterError("sd must be > 0")
        return cls(np.full(dim, float(mean)), cov=np.eye(dim) * sd**2)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @cached_property
    def _chol_cov(self) -> np.ndarray:
        if self.cov is not None:
            return np.linalg.cholesky(self.cov)
        return np.linalg.inv(np.linalg.cholesky(self.precision)).T

    @cached_property
    def _prec(self) -> np.ndarray:
        if self.precision is not None:
            return self.precision
        return np.linalg.inv(self.cov)

    def draw(self, rng, size=None):
        g = _as_generator(rng)
        if size is None:
            return self.mean + self._chol_cov @ g.standard_normal(self.dim)
        z = g.standard_normal((size, self.dim))
        return self.mean + z @ self._chol_cov.T

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        d = x - self.mean
        l_cov = self._chol_cov
        sol = np.linalg.solve(l_cov, d.T if d.ndim > 1 else d)
        quad = np.sum(sol * sol, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(l_cov)))
        return -0.5 * (self.dim * _LOG_2PI + logdet + quad)

    @property
    def dist_mean(self) -> np.ndarray:
        return self.mean


Distribution = (
    Normal
    | Beta
    | TranslatedBeta
    | Gamma
    | InverseGamma
    | Exponential
    | Constant
    | Infinity
    | MultivariateNormal
)


def draw(dist, rng, size=None):
    """Variate(s) distributed per ``dist``; Constant returns its fixed value."""
    return dist.draw(rng, size=size)


def log_density(dist, x):
    """Natural-log density at ``x``; -inf outside the support."""
    return dist.log_density(x)


def cdf(dist, x):
    return dist.cdf(x)


def dist_mean(dist):
    return dist.dist_mean


def draw_student_t(nu: float, rng, size=None):
    """Standard Student-t variates composed as a Gamma scale mixture of normals."""
    g = _as_generator(rng)
    tau = nu / (2.0 * g.gamma(nu / 2.0, 1.0, size=size))
    return np.sqrt(tau) * g.standard_normal(size=size)


def draw_gig(lam, chi, psi, rng):
    """Generalized inverse Gaussian draws, density ~ x^(lam-1) exp(-(chi/x + psi x)/2).

    Backed by the rejection sampler of scipy's ``geninvgauss`` with the
    degenerate boundaries handled explicitly: chi = 0 falls back to a Gamma,
    psi = 0 to an inverse gamma.  Parameters broadcast elementwise.
    """
    g = _as_generator(rng)
    lam, chi, psi = np.broadcast_arrays(
        np.asarray(lam, dtype=float), np.asarray(chi, dtype=float), np.asarray(psi, dtype=float)
    )
    if np.any(chi < 0) or np.any(psi < 0):
        raise InvalidParameterError("GIG chi and psi must be >= 0")
    out = np.empty(lam.shape)
    flat_lam, flat_chi, flat_psi = lam.ravel(), chi.ravel(), psi.ravel()
    flat_out = out.ravel()
    gamma_mask = flat_chi == 0.0
    inv_mask = (flat_psi == 0.0) & ~gamma_mask
    gig_mask = ~gamma_mask & ~inv_mask
    if np.any(gamma_mask):
        if np.any(flat_lam[gamma_mask] <= 0):
            raise InvalidParameterError("GIG with chi = 0 requires lam > 0")
        flat_out[gamma_mask] = g.gamma(flat_lam[gamma_mask], 2.0 / flat_psi[gamma_mask])
    if np.any(inv_mask):
        if np.any(flat_lam[inv_mask] >= 0):
            raise InvalidParameterError("GIG with psi = 0 requires lam < 0")
        flat_out[inv_mask] = flat_chi[inv_mask] / (2.0 * g.gamma(-flat_lam[inv_mask], 1.0))
    if np.any(gig_mask):
        b = np.sqrt(flat_chi[gig_mask] * flat_psi[gig_mask])
        scale = np.sqrt(flat_chi[gig_mask] / flat_psi[gig_mask])
        flat_out[gig_mask] = scale * stats.geninvgauss.rvs(
            flat_lam[gig_mask], b, random_state=g
        )
    if out.ndim == 0:
        return float(flat_out[0])
    return out
