"""Sampling from Gaussians with symmetric tridiagonal precision matrices.

The latent log-variance path has a banded posterior precision; one Cholesky
factorization plus a forward and a backward substitution yield an exact
joint draw of the whole path.
"""
from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["sample_tridiag_mvn", "tridiag_solve"]


@njit(cache=True)
def _chol_tridiag(diag, off):
    """Cholesky L (diag ell, subdiag g) of the tridiagonal matrix (diag, off)."""
    n = diag.shape[0]
    ell = np.empty(n)
    g = np.empty(max(n - 1, 0))
    if diag[0] <= 0.0:
        raise ValueError("tridiagonal precision is not positive definite")
    ell[0] = np.sqrt(diag[0])
    for i in range(n - 1):
        g[i] = off[i] / ell[i]
        d = diag[i + 1] - g[i] * g[i]
        if d <= 0.0:
            raise ValueError("tridiagonal precision is not positive definite")
        ell[i + 1] = np.sqrt(d)
    return ell, g


@njit(cache=True)
def _sample_with_factor(ell, g, linear, z):
    n = ell.shape[0]
    w = np.empty(n)
    w[0] = linear[0] / ell[0]
    for i in range(1, n):
        w[i] = (linear[i] - g[i - 1] * w[i - 1]) / ell[i]
    x = np.empty(n)
    x[n - 1] = (w[n - 1] + z[n - 1]) / ell[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = (w[i] + z[i] - g[i] * x[i + 1]) / ell[i]
    return x


@njit(cache=True)
def _sample_batch_with_factor(ell, g, linear, z):
    n = ell.shape[0]
    nb = z.shape[1]
    w = np.empty(n)
    w[0] = linear[0] / ell[0]
    for i in range(1, n):
        w[i] = (linear[i] - g[i - 1] * w[i - 1]) / ell[i]
    x = np.empty((n, nb))
    for b in range(nb):
        x[n - 1, b] = (w[n - 1] + z[n - 1, b]) / ell[n - 1]
    for i in range(n - 2, -1, -1):
        for b in range(nb):
            x[i, b] = (w[i] + z[i, b] - g[i] * x[i + 1, b]) / ell[i]
    return x


def sample_tridiag_mvn(diag, off, linear, z):
    """Draw from N(P^-1 linear, P^-1) where P is tridiagonal (diag, off).

    ``z`` holds standard normal variates, shape (n,) for one draw or (n, b)
    for a batch sharing the same precision.  With z = 0 the posterior mean
    is returned.
    """
    diag = np.ascontiguousarray(diag, dtype=np.float64)
    off = np.ascontiguousarray(off, dtype=np.float64)
    linear = np.ascontiguousarray(linear, dtype=np.float64)
    z = np.ascontiguousarray(z, dtype=np.float64)
    ell, g = _chol_tridiag(diag, off)
    if z.ndim == 1:
        return _sample_with_factor(ell, g, linear, z)
    return _sample_batch_with_factor(ell, g, linear, z)


def tridiag_solve(diag, off, b):
    """Solve P x = b for tridiagonal symmetric positive definite P."""
    n = np.asarray(diag).shape[0]
    return sample_tridiag_mvn(diag, off, b, np.zeros(n))
