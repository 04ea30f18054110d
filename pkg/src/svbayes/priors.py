"""Prior specification for the univariate SV model family."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .distributions import (
    Beta,
    Constant,
    Exponential,
    Gamma,
    Infinity,
    InverseGamma,
    MultivariateNormal,
    Normal,
    TranslatedBeta,
)

__all__ = [
    "MODEL_KINDS",
    "has_t_errors",
    "has_leverage",
    "PriorSpec",
    "default_priors",
    "validate",
    "InconsistentSpecError",
    "priors_to_config",
    "priors_from_config",
]

MODEL_KINDS = ("sv", "svt", "svl", "svtl")


class InconsistentSpecError(ValueError):
    """A prior specification conflicts with the requested model kind."""


def has_t_errors(model_kind: str) -> bool:
    return model_kind in ("svt", "svtl")


def has_leverage(model_kind: str) -> bool:
    return model_kind in ("svl", "svtl")


@dataclass(frozen=True)
class PriorSpec:
    """One prior slot for every parameter of the observation/state equations.

    ``nu`` is a prior on nu - 2 when Exponential (support nu > 2);
    ``latent0_variance`` is either the string "stationary" or a Constant
    giving a fixed variance for the pre-sample log-variance state.
    """

    mu: Normal | Constant
    phi: TranslatedBeta | Normal | Constant
    sigma2: Gamma | InverseGamma | Constant
    nu: Exponential | Infinity | Constant
    rho: TranslatedBeta | Constant
    beta: MultivariateNormal
    latent0_variance: str | Constant = "stationary"


def default_priors(model_kind: str, k_regressors: int = 1) -> PriorSpec:
    """The package defaults: mu ~ N(0, 100^2), (phi+1)/2 ~ Beta(5, 1.5),
    sigma^2 ~ Gamma(0.5, 0.5), beta isotropic N(0, 10000^2); nu - 2 ~ Exp(0.1)
    for t-error models else Infinity; (rho+1)/2 ~ Beta(4, 4) for leverage
    models else fixed at 0."""
    if model_kind not in MODEL_KINDS:
        raise InconsistentSpecError(f"unknown model kind {model_kind!r}")
    return PriorSpec(
        mu=Normal(0.0, 100.0),
        phi=TranslatedBeta(5.0, 1.5),
        sigma2=Gamma(0.5, 0.5),
        nu=Exponential(0.1) if has_t_errors(model_kind) else Infinity(),
        rho=TranslatedBeta(4.0, 4.0) if has_leverage(model_kind) else Constant(0.0),
        beta=MultivariateNormal.isotropic(0.0, 10000.0, max(k_regressors, 1)),
        latent0_variance="stationary",
    )


def _fail(field: str, msg: str):
    raise InconsistentSpecError(f"prior for {field!r}: {msg}")


def validate(spec: PriorSpec, model_kind: str) -> PriorSpec:
    """Check model/prior consistency; returns the spec unchanged on success."""
    if model_kind not in MODEL_KINDS:
        raise InconsistentSpecError(f"unknown model kind {model_kind!r}")

    if not isinstance(spec.mu, (Normal, Constant)):
        _fail("mu", "must be Normal or Constant")

    if not isinstance(spec.phi, (TranslatedBeta, Normal, Constant)):
        _fail("phi", "must be TranslatedBeta, Normal, or Constant")
    stationary = spec.latent0_variance == "stationary"
    if isinstance(spec.phi, Constant) and stationary and not abs(spec.phi.value) < 1:
        _fail("phi", "|phi| must be < 1 under the stationary initial state")

    if not isinstance(spec.sigma2, (Gamma, InverseGamma, Constant)):
        _fail("sigma2", "must be Gamma, InverseGamma, or Constant")
    if isinstance(spec.sigma2, Constant) and not spec.sigma2.value > 0:
        _fail("sigma2", "fixed value must be > 0")

    if has_t_errors(model_kind):
        if isinstance(spec.nu, Infinity):
            _fail("nu", f"{model_kind} needs a finite-nu prior (Exponential or Constant)")
        if isinstance(spec.nu, Constant) and not spec.nu.value > 2:
            _fail("nu", "fixed degrees of freedom must exceed 2")
        if not isinstance(spec.nu, (Exponential, Constant)):
            _fail("nu", "must be Exponential (on nu - 2) or Constant")
    else:
        if not isinstance(spec.nu, Infinity):
            _fail("nu", f"{model_kind} has Gaussian errors; nu must be Infinity")

    if has_leverage(model_kind):
        if not isinstance(spec.rho, (TranslatedBeta, Constant)):
            _fail("rho", "must be TranslatedBeta or Constant")
        if isinstance(spec.rho, Constant) and not abs(spec.rho.value) < 1:
            _fail("rho", "fixed value must lie in (-1, 1)")
    else:
        if not isinstance(spec.rho, Constant) or spec.rho.value != 0.0:
            _fail("rho", f"{model_kind} has no leverage; rho must be Constant(0)")

    if not isinstance(spec.beta, MultivariateNormal):
        _fail("beta", "must be MultivariateNormal")

    if spec.latent0_variance != "stationary":
        if not isinstance(spec.latent0_variance, Constant) or not spec.latent0_variance.value > 0:
            _fail("latent0_variance", 'must be "stationary" or Constant(> 0)')
    return spec


def expand_beta_prior(prior: MultivariateNormal, k: int) -> MultivariateNormal:
    """Adapt an isotropic beta prior to the design-matrix width ``k``."""
    if prior.dim == k:
        return prior
    cov = prior.cov if prior.cov is not None else np.linalg.inv(prior.precision)
    is_isotropic = np.allclose(cov, cov[0, 0] * np.eye(prior.dim)) and np.allclose(
        prior.mean, prior.mean[0]
    )
    if not is_isotropic:
        raise InconsistentSpecError(
            f"beta prior has dimension {prior.dim} but the design matrix has {k} columns"
        )
    return MultivariateNormal.isotropic(float(prior.mean[0]), math.sqrt(cov[0, 0]), k)


# -- flat key-value (de)serialization used by the CLI config ----------------

def _dist_to_config(d):
    if isinstance(d, Normal):
        return {"kind": "normal", "mean": d.mean, "sd": d.sd}
    if isinstance(d, TranslatedBeta):
        return {"kind": "beta", "shape1": d.shape1, "shape2": d.shape2}
    if isinstance(d, Gamma):
        return {"kind": "gamma", "shape": d.shape, "rate": d.rate}
    if isinstance(d, InverseGamma):
        return {"kind": "inverse_gamma", "shape": d.shape, "scale": d.scale}
    if isinstance(d, Exponential):
        return {"kind": "exponential", "rate": d.rate}
    if isinstance(d, Constant):
        return {"kind": "constant", "value": d.value}
    if isinstance(d, Infinity):
        return {"kind": "infinity"}
    raise TypeError(f"cannot serialize {type(d).__name__}")


def _dist_from_config(c):
    kind = c["kind"]
    if kind == "normal":
        return Normal(c["mean"], c["sd"])
    if kind == "beta":
        return TranslatedBeta(c["shape1"], c["shape2"])
    if kind == "gamma":
        return Gamma(c["shape"], c["rate"])
    if kind == "inverse_gamma":
        return InverseGamma(c["shape"], c["scale"])
    if kind == "exponential":
        return Exponential(c["rate"])
    if kind == "constant":
        return Constant(c["value"])
    if kind == "infinity":
        return Infinity()
    raise InconsistentSpecError(f"unknown distribution kind {kind!r}")


def priors_to_config(spec: PriorSpec) -> dict:
    """Flatten to a plain dict of dotted keys (JSON-safe)."""
    out = {}
    for name in ("mu", "phi", "sigma2", "nu", "rho"):
        for key, val in _dist_to_config(getattr(spec, name)).items():
            out[f"prior.{name}.{key}"] = val
    out["prior.beta.mean"] = float(spec.beta.mean[0])
    cov = spec.beta.cov if spec.beta.cov is not None else np.linalg.inv(spec.beta.precision)
    out["prior.beta.sd"] = float(math.sqrt(cov[0, 0]))
    if spec.latent0_variance == "stationary":
        out["prior.latent0.variance"] = "stationary"
    else:
        out["prior.latent0.variance"] = spec.latent0_variance.value
    return out


def priors_from_config(flat: dict, model_kind: str, k_regressors: int = 1) -> PriorSpec:
    """Build a PriorSpec from dotted keys, falling back to the defaults.

    Besides the explicit ``prior.<param>.<field>`` keys this accepts the
    compact shorthands ``prior.mu = [mean, sd]``, ``prior.phi = [a, b]``,
    ``prior.sigma = B`` (half-normal scale), ``prior.beta = [mean, sd]``,
    ``prior.nu = rate`` and ``prior.rho = [a, b]``.
    """
    base = default_priors(model_kind, k_regressors)
    fields = {}

    def nested(name):
        sub = {k.split(".", 2)[2]: v for k, v in flat.items() if k.startswith(f"prior.{name}.")}
        return sub

    if "prior.mu" in flat:
        m, s = flat["prior.mu"]
        fields["mu"] = Normal(float(m), float(s))
    elif nested("mu"):
        fields["mu"] = _dist_from_config(nested("mu"))
    if "prior.phi" in flat:
        a, b = flat["prior.phi"]
        fields["phi"] = TranslatedBeta(float(a), float(b))
    elif nested("phi"):
        fields["phi"] = _dist_from_config(nested("phi"))
    if "prior.sigma" in flat:
        fields["sigma2"] = Gamma(0.5, 0.5 / float(flat["prior.sigma"]))
    elif nested("sigma2"):
        fields["sigma2"] = _dist_from_config(nested("sigma2"))
    if "prior.nu" in flat:
        fields["nu"] = Exponential(float(flat["prior.nu"]))
    elif nested("nu"):
        fields["nu"] = _dist_from_config(nested("nu"))
    if "prior.rho" in flat:
        a, b = flat["prior.rho"]
        fields["rho"] = TranslatedBeta(float(a), float(b))
    elif nested("rho"):
        fields["rho"] = _dist_from_config(nested("rho"))
    if "prior.beta" in flat:
        m, s = flat["prior.beta"]
        fields["beta"] = MultivariateNormal.isotropic(float(m), float(s), k_regressors)
    elif "prior.beta.mean" in flat or "prior.beta.sd" in flat:
        m = float(flat.get("prior.beta.mean", 0.0))
        s = float(flat.get("prior.beta.sd", 10000.0))
        fields["beta"] = MultivariateNormal.isotropic(m, s, k_regressors)
    if "prior.latent0.variance" in flat:
        v = flat["prior.latent0.variance"]
        fields["latent0_variance"] = "stationary" if v == "stationary" else Constant(float(v))

    spec = replace(base, **fields)
    return validate(spec, model_kind)
