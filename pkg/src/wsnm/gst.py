"""Generalized soft-thresholding (GST) for the scalar l_p shrinkage problem.

Every function here solves, or inspects, the one-dimensional problem::

    minimize_{delta >= 0}   0.5 * (delta - |sigma|)**2 + lam * delta**p

with ``0 < p <= 1``.  Note the factor one half on the fidelity term: callers
whose objective reads ``a * (delta - sigma)**2 + w * delta**p`` must pass
``lam = w / (2 * a)``.  :func:`wsnm.linalg.wsnm_prox` does this rescaling in
one place so application code never has to.

All functions accept scalars or numpy arrays (broadcast elementwise) and are
pure.
"""

import numpy as np

from .exceptions import DomainError

#: Fixed-point iterations used by the solvers.
DEFAULT_ITERS = 8
#: Fixed-point iterations used by diagnostics and oracles.
DIAGNOSTIC_ITERS = 30
#: Lower clamp applied to iterates before the ``p - 1`` power.
ITERATE_FLOOR = 1e-12


def _check_power(p):
    if not (0.0 < p <= 1.0):
        raise DomainError(f"power p must lie in (0, 1], got {p!r}")


def _check_weight(lam):
    lam = np.asarray(lam, dtype=float)
    if not np.all(np.isfinite(lam)):
        raise DomainError("weight lambda must be finite")
    if np.any(lam < 0):
        raise DomainError("weight lambda must be non-negative")
    return lam


def _unwrap(x):
    return float(x) if np.ndim(x) == 0 else x


def gst_threshold(lam, p):
    """Dead-zone threshold of the scalar problem.

    Observations with ``|sigma| <= gst_threshold(lam, p)`` shrink to exactly
    zero.  For ``p == 1`` this is plain soft thresholding and the threshold is
    ``lam`` itself.
    """
    _check_power(p)
    lam = _check_weight(lam)
    if p == 1.0:
        return _unwrap(lam.copy())
    base = 2.0 * lam * (1.0 - p)
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = base ** (1.0 / (2.0 - p)) + lam * p * base ** ((p - 1.0) / (2.0 - p))
    tau = np.where(lam == 0, 0.0, tau)
    return _unwrap(tau)


def gst_solve(sigma, lam, p, J=DEFAULT_ITERS):
    """Global minimizer of the scalar problem, with the sign of ``sigma``.

    Parameters
    ----------
    sigma : float or array
        Observation(s).  Negative values are handled by odd symmetry.
    lam : float or array
        Non-negative effective weight(s), broadcast against ``sigma``.
    p : float
        Power in (0, 1].
    J : int
        Number of fixed-point iterations ``d <- |sigma| - lam*p*d**(p-1)``
        started from ``d = |sigma|``.

    Returns
    -------
    float or array
        ``0`` inside the dead zone, otherwise ``sign(sigma) * d_J``.
    """
    _check_power(p)
    lam = _check_weight(lam)
    if int(J) != J or J < 1:
        raise DomainError(f"iteration count J must be a positive integer, got {J!r}")
    sigma = np.asarray(sigma, dtype=float)
    if not np.all(np.isfinite(sigma)):
        raise DomainError("observation sigma must be finite")

    mag = np.abs(sigma)
    if p == 1.0:
        delta = np.maximum(mag - lam, 0.0)
    else:
        tau = gst_threshold(lam, p)
        mag = np.broadcast_to(mag, np.broadcast(mag, lam).shape)
        delta = mag.copy()
        for _ in range(int(J)):
            delta = mag - lam * p * np.maximum(delta, ITERATE_FLOOR) ** (p - 1.0)
        delta = np.where(mag <= tau, 0.0, delta)
    return _unwrap(np.sign(sigma) * delta)


def gst_stationarity_residual(delta, sigma, lam, p):
    """``delta - |sigma| + lam*p*delta**(p-1)``; zero at a nonzero minimizer."""
    _check_power(p)
    delta = np.asarray(delta, dtype=float)
    if np.any(delta <= 0):
        raise DomainError("stationarity residual needs delta > 0")
    lam = np.asarray(lam, dtype=float)
    return _unwrap(delta - np.abs(np.asarray(sigma, dtype=float)) + lam * p * delta ** (p - 1.0))


def gst_objective(delta, sigma, lam, p):
    """Scalar objective ``0.5*(delta - |sigma|)**2 + lam*delta**p``."""
    delta = np.asarray(delta, dtype=float)
    return _unwrap(0.5 * (delta - np.abs(np.asarray(sigma, dtype=float))) ** 2 + lam * np.abs(delta) ** p)
