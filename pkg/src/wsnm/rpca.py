"""Low-rank plus sparse decomposition by inexact augmented Lagrangian.

:func:`wsnm_rpca` replaces the nuclear norm of classical RPCA with the
weighted Schatten p-norm; :func:`nnm_rpca` is the nuclear-norm baseline.
Both run the same alternating scheme::

    E <- soft(Y + Z/mu - X, e_weight/mu)
    X <- low-rank prox of (Y + Z/mu - E)
    Z <- Z + mu*(Y - X - E);  mu <- rho*mu

starting from ``X = Y, E = 0, Z = 0``.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DivergenceError, DomainError
from .gst import DEFAULT_ITERS
from .linalg import WeightVector, as_matrix, shrink_spectrum, singular_values, svd

WEIGHT_MODES = ("reweighted_per_iteration", "fixed_from_Y")
WEIGHT_EPS = 1e-16


@dataclass
class RpcaConfig:
    """Parameters of :func:`wsnm_rpca`.

    ``C=None`` means the synthetic-data rule ``C = 10**(1/p)``; ``mu0=None``
    means ``1 / ||Y||_2``.  ``weights``, when given, is a fixed weight vector
    that overrides ``C`` and ``weight_mode``.
    """

    p: float = 0.7
    C: float = None
    mu0: float = None
    rho: float = 1.2
    tol: float = 1e-7
    max_iters: int = 500
    weight_mode: str = "reweighted_per_iteration"
    gst_iters: int = DEFAULT_ITERS
    weights: object = None

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise DomainError(f"p must lie in (0, 1], got {self.p!r}")
        if self.C is None:
            self.C = 10.0 ** (1.0 / self.p)
        if self.C < 0:
            raise DomainError(f"C must be non-negative, got {self.C!r}")
        if self.mu0 is not None and not self.mu0 > 0:
            raise DomainError(f"mu0 must be positive, got {self.mu0!r}")
        if not self.rho > 1:
            raise DomainError(f"rho must exceed 1, got {self.rho!r}")
        if not self.tol > 0:
            raise DomainError(f"tol must be positive, got {self.tol!r}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise DomainError(f"max_iters must be a positive integer, got {self.max_iters!r}")
        if self.weight_mode not in WEIGHT_MODES:
            raise DomainError(f"weight_mode must be one of {WEIGHT_MODES}, got {self.weight_mode!r}")


@dataclass
class RpcaResult:
    X: np.ndarray
    E: np.ndarray
    iterations: int
    converged: bool
    residual_history: list = field(default_factory=list)
    step_history: list = field(default_factory=list)
    multiplier_norm_history: list = field(default_factory=list)
    estimated_rank: int = 0
    seconds: float = 0.0

    @property
    def hit_max_iters(self):
        return not self.converged


def soft_threshold_matrix(M, tau):
    """Entrywise ``sign(m) * max(|m| - tau, 0)``."""
    if tau < 0:
        raise DomainError(f"threshold must be non-negative, got {tau!r}")
    M = np.asarray(M, dtype=float)
    return np.sign(M) * np.maximum(np.abs(M) - tau, 0.0)


def rpca_weights(sigma, C, m, n, eps=WEIGHT_EPS):
    """``w_i = C*sqrt(m*n) / (sigma_i + eps)`` for a non-ascending spectrum."""
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0) or np.any(np.diff(sigma) > 0):
        raise DomainError("sigma must be non-negative and non-ascending")
    return WeightVector.of(C * np.sqrt(m * n) / (sigma + eps))


def estimate_rank(X, rel_tol=1e-6):
    """Number of singular values above ``rel_tol * sigma_1``."""
    s = singular_values(X)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


def _zero_result(Y):
    zeros = np.zeros_like(Y)
    return RpcaResult(zeros, zeros.copy(), 1, True, [0.0], [0.0], [0.0], 0)


def _alm(Y, x_step, e_weight, mu0, rho, tol, max_iters, rank_tol):
    start = time.perf_counter()
    y_norm = np.linalg.norm(Y)
    mu = mu0 if mu0 is not None else 1.0 / np.linalg.norm(Y, 2)
    X = Y.copy()
    E = np.zeros_like(Y)
    Z = np.zeros_like(Y)
    residuals, steps, multipliers = [], [], []
    converged = False
    k = 0
    while k < max_iters:
        E_new = soft_threshold_matrix(Y + Z / mu - X, e_weight / mu)
        X_new = x_step(Y + Z / mu - E_new, mu)
        R = Y - X_new - E_new
        Z = Z + mu * R
        if not (np.all(np.isfinite(X_new)) and np.all(np.isfinite(Z))):
            raise DivergenceError(f"non-finite iterate at iteration {k + 1}", iteration=k + 1)
        steps.append(float(np.sum((X_new - X) ** 2) + np.sum((E_new - E) ** 2)))
        residuals.append(float(np.linalg.norm(R) / y_norm))
        multipliers.append(float(np.linalg.norm(Z)))
        X, E = X_new, E_new
        mu *= rho
        k += 1
        if residuals[-1] <= tol:
            converged = True
            break
    return RpcaResult(
        X, E, k, converged, residuals, steps, multipliers,
        estimate_rank(X, rank_tol), time.perf_counter() - start,
    )


def wsnm_rpca(Y, cfg=None, rank_tol=1e-6):
    """Weighted Schatten p-norm RPCA.

    Parameters
    ----------
    Y : array_like, shape (m, n)
        Observation, modelled as low rank plus sparse.
    cfg : RpcaConfig, optional
    rank_tol : float
        Relative tolerance passed to :func:`estimate_rank` for the result.

    Returns
    -------
    RpcaResult
    """
    cfg = cfg or RpcaConfig()
    Y = as_matrix(Y, "Y")
    if not np.any(Y):
        return _zero_result(Y)
    m, n = Y.shape

    if cfg.weights is not None:
        fixed = WeightVector.of(cfg.weights)
    elif cfg.weight_mode == "fixed_from_Y":
        fixed = rpca_weights(singular_values(Y), cfg.C, m, n)
    else:
        fixed = None

    def x_step(T, mu):
        factors = svd(T)
        w = fixed if fixed is not None else rpca_weights(factors.s, cfg.C, m, n)
        delta = shrink_spectrum(factors, w, cfg.p, fidelity_scale=mu / 2.0, J=cfg.gst_iters)
        return (factors.U * delta) @ factors.V.T

    return _alm(Y, x_step, 1.0, cfg.mu0, cfg.rho, cfg.tol, cfg.max_iters, rank_tol)


def nnm_rpca(Y, lam=None, mu0=None, rho=1.2, tol=1e-7, max_iters=500, rank_tol=1e-6):
    """Nuclear-norm RPCA baseline, ``min ||X||_* + lam*||E||_1``.

    ``lam`` defaults to ``1/sqrt(max(m, n))``; the X-step is singular value
    soft thresholding at ``1/mu`` and the E-step thresholds at ``lam/mu``.
    """
    Y = as_matrix(Y, "Y")
    if not np.any(Y):
        return _zero_result(Y)
    if lam is None:
        lam = 1.0 / np.sqrt(max(Y.shape))
    if not lam > 0:
        raise DomainError(f"lam must be positive, got {lam!r}")
    if not rho > 1:
        raise DomainError(f"rho must exceed 1, got {rho!r}")

    def x_step(T, mu):
        factors = svd(T)
        return (factors.U * np.maximum(factors.s - 1.0 / mu, 0.0)) @ factors.V.T

    return _alm(Y, x_step, lam, mu0, rho, tol, max_iters, rank_tol)
