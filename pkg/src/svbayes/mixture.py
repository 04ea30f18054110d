"""Finite Gaussian-mixture approximation of the log chi-squared(1) law.

Linearizing the observation equation by taking log squares turns the SV
model into a conditionally Gaussian state space model once the distribution
of log(eps^2) is replaced by this 10-component normal mixture.  The leverage
variant additionally carries, per component, the linearization coefficients
that couple exp(log(eps^2)/2) to the state innovation.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numba import njit

__all__ = ["MixtureTable", "mixture_table", "draw_indicators", "OffsetUnderflowError"]


class OffsetUnderflowError(ValueError):
    """Linearized observations contain non-finite entries."""


# Ten-component approximation of the density of log(eps^2), eps ~ N(0, 1):
# component probabilities, means, and variances.  The transcription is pinned
# by the moment and Kolmogorov-Smirnov tests in the test suite, which compare
# against quadrature values of the exact log chi-squared(1) law.
_PROBS = np.array(
    [0.00609, 0.04775, 0.13057, 0.20674, 0.22715, 0.18842, 0.12047, 0.05591, 0.01575, 0.00115]
)
_MEANS = np.array(
    [1.92677, 1.34744, 0.73504, 0.02266, -0.85173, -1.97278, -3.46788, -5.55246, -8.68384, -14.65000]
)
_VARS = np.array(
    [0.11265, 0.17788, 0.26768, 0.40611, 0.62699, 0.98583, 1.57469, 2.54498, 4.16591, 7.33342]
)
# Leverage coupling: within component j, exp(xi/2) is linearized as
# exp(m_j/2) * (a_j + b_j (xi - m_j)) with a_j = E exp(z/2), z ~ N(0, v_j),
# and slope b_j = a_j / 2.
_COEF_A = np.array(
    [1.01418, 1.02248, 1.03403, 1.05207, 1.08153, 1.13114, 1.21754, 1.37454, 1.68327, 2.50097]
)
_COEF_B = np.array(
    [0.50710, 0.51124, 0.51701, 0.52604, 0.54076, 0.56557, 0.60877, 0.68728, 0.84163, 1.25049]
)


@dataclass(frozen=True)
class MixtureTable:
    probs: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    coef_a: np.ndarray | None = None
    coef_b: np.ndarray | None = None

    @property
    def n_components(self) -> int:
        return self.probs.shape[0]

    @property
    def has_coupling(self) -> bool:
        return self.coef_a is not None

    @cached_property
    def _logp_half(self) -> np.ndarray:
        # log p_j - log v_j / 2, the component-constant part of the log weights
        with np.errstate(divide="ignore"):
            return np.log(self.probs) - 0.5 * np.log(self.variances)


def mixture_table(kind: str = "no_leverage") -> MixtureTable:
    """The 10-component table; ``kind="leverage"`` includes the coupling terms."""
    if kind == "no_leverage":
        return MixtureTable(_PROBS.copy(), _MEANS.copy(), _VARS.copy())
    if kind == "leverage":
        return MixtureTable(_PROBS.copy(), _MEANS.copy(), _VARS.copy(), _COEF_A.copy(), _COEF_B.copy())
    raise ValueError(f"unknown mixture kind {kind!r}")


@njit(cache=True)
def _select_rows_kernel(logw, u):
    n, k = logw.shape
    out = np.empty(n, dtype=np.int64)
    w = np.empty(k)
    for t in range(n):
        mx = logw[t, 0]
        for j in range(1, k):
            if logw[t, j] > mx:
                mx = logw[t, j]
        tot = 0.0
        for j in range(k):
            w[j] = np.exp(logw[t, j] - mx)
            tot += w[j]
        target = u[t] * tot
        acc = 0.0
        sel = k - 1
        for j in range(k):
            acc += w[j]
            if acc > target:
                sel = j
                break
        out[t] = sel
    return out


@njit(cache=True)
def _fast_indicator_kernel(ystar, h, logp_half, m, v, u):
    n = ystar.shape[0]
    k = m.shape[0]
    out = np.empty(n, dtype=np.int64)
    w = np.empty(k)
    for t in range(n):
        mx = -1e308
        for j in range(k):
            r = ystar[t] - h[t] - m[j]
            w[j] = logp_half[j] - 0.5 * r * r / v[j]
            if w[j] > mx:
                mx = w[j]
        tot = 0.0
        for j in range(k):
            w[j] = np.exp(w[j] - mx)
            tot += w[j]
        target = u[t] * tot
        acc = 0.0
        sel = k - 1
        for j in range(k):
            acc += w[j]
            if acc > target:
                sel = j
                break
        out[t] = sel
    return out


def _categorical_rows(logw: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row of a matrix of unnormalized log weights."""
    return _select_rows_kernel(np.ascontiguousarray(logw), rng.random(logw.shape[0]))


def draw_indicators(
    ystar: np.ndarray, h: np.ndarray, table: MixtureTable, rng: np.random.Generator
) -> np.ndarray:
    """Posterior draw of the mixture component indicators.

    P(s_t = j) ~ p_j N(ystar_t; h_t + m_j, v_j), evaluated in log space with
    max subtraction for stability.
    """
    ystar = np.ascontiguousarray(ystar, dtype=float)
    h = np.ascontiguousarray(h, dtype=float)
    if ystar.shape != h.shape:
        raise ValueError("ystar and h must have equal length")
    if not np.all(np.isfinite(ystar)):
        raise OffsetUnderflowError("non-finite linearized observation")
    return _fast_indicator_kernel(
        ystar, h, table._logp_half, table.means, table.variances, rng.random(ystar.shape[0])
    )
