"""Spectral machinery: thin SVD, weighted Schatten p-norm and its prox.

Matrices are plain two-dimensional float64 numpy arrays throughout.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import ConvergenceError, DimensionError, DomainError, OrderingError
from .gst import DEFAULT_ITERS, gst_solve

JACOBI_MAX_SWEEPS = 60


class SvdFactors(NamedTuple):
    """Thin SVD ``M = U @ diag(s) @ V.T`` with ``s`` non-ascending."""

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    def reconstruct(self):
        return (self.U * self.s) @ self.V.T


@dataclass(frozen=True)
class WeightVector:
    """Non-negative per-singular-value weights.

    ``certified`` records whether ``weights`` was verified non-descending,
    the hypothesis under which the per-component prox is globally optimal.
    """

    weights: np.ndarray
    certified: bool

    @classmethod
    def of(cls, weights):
        """Wrap ``weights`` and verify the ordering certificate."""
        w = np.array(weights, dtype=float).ravel()
        if np.any(np.isnan(w)) or np.any(w < 0):
            raise DomainError("weights must be non-negative")
        w.setflags(write=False)
        return cls(w, bool(np.all(np.diff(w) >= 0)))

    def __len__(self):
        return self.weights.size


def as_matrix(M, name="matrix"):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.size == 0:
        raise DimensionError(f"{name} must be a non-empty 2-D array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise DomainError(f"{name} has non-finite entries")
    return M


def _canonical(U, s, V):
    # Stable sort keeps original index order among equal singular values.
    order = np.argsort(-s, kind="stable")
    U, s, V = U[:, order], s[order], V[:, order]
    idx = np.argmax(np.abs(U), axis=0)
    flip = U[idx, np.arange(U.shape[1])] < 0
    U[:, flip] *= -1
    V[:, flip] *= -1
    return SvdFactors(U, s, V)


def _lapack_svd(M):
    try:
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"LAPACK SVD did not converge: {exc}") from exc
    return U, s, Vt.T.copy()


def jacobi_svd(M, tol=1e-15, max_sweeps=JACOBI_MAX_SWEEPS):
    """One-sided (Hestenes) Jacobi SVD with a fixed cyclic sweep order.

    Columns are orthogonalized pairwise in the order (0,1), (0,2), ...,
    (n-2, n-1); the procedure is deterministic for identical input bits.
    Slow in pure numpy, so intended for small matrices and as an
    independent check on the LAPACK route.
    """
    M = as_matrix(M)
    transpose = M.shape[0] < M.shape[1]
    A = (M.T if transpose else M).copy()
    m, n = A.shape
    V = np.eye(n)
    off = np.inf
    for _ in range(max_sweeps):
        off = 0.0
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                ai, aj = A[:, i], A[:, j]
                alpha = ai @ ai
                beta = aj @ aj
                gamma = ai @ aj
                if alpha == 0.0 or beta == 0.0:
                    continue
                ratio = abs(gamma) / np.sqrt(alpha * beta)
                off = max(off, ratio)
                if ratio <= tol:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                sn = c * t
                A[:, [i, j]] = np.column_stack((c * ai - sn * aj, sn * ai + c * aj))
                vi, vj = V[:, i].copy(), V[:, j].copy()
                V[:, i] = c * vi - sn * vj
                V[:, j] = sn * vi + c * vj
        if not rotated:
            break
    else:
        raise ConvergenceError(
            f"Jacobi SVD not converged after {max_sweeps} sweeps (off-diagonal {off:.3e})",
            residual=off,
        )

    s = np.linalg.norm(A, axis=0)
    U = np.zeros_like(A)
    scale = s.max() if s.size else 0.0
    live = s > scale * m * np.finfo(float).eps
    U[:, live] = A[:, live] / s[live]
    s[~live] = 0.0
    if not np.all(live):
        U = _complete_basis(U, live)
    if transpose:
        U, V = V, U
    return _canonical(U, s, V)


def _complete_basis(U, live):
    # Fill columns for zero singular values with an orthonormal complement.
    basis = U[:, live]
    m = U.shape[0]
    Q, _ = np.linalg.qr(np.hstack([basis, np.eye(m)]))
    extra = Q[:, basis.shape[1]:basis.shape[1] + int((~live).sum())]
    U = U.copy()
    U[:, ~live] = extra
    return U


def svd(M, method="lapack"):
    """Thin SVD with non-ascending singular values and a sign convention.

    The largest-magnitude entry of every column of ``U`` is made
    non-negative (the paired column of ``V`` flips with it).

    Parameters
    ----------
    M : array_like, shape (m, n)
    method : {"lapack", "jacobi"}
        ``"lapack"`` calls the divide-and-conquer driver through numpy;
        ``"jacobi"`` uses :func:`jacobi_svd`.
    """
    M = as_matrix(M)
    if method == "jacobi":
        return jacobi_svd(M)
    if method != "lapack":
        raise ValueError(f"unknown SVD method {method!r}")
    return _canonical(*_lapack_svd(M))


def singular_values(M):
    """Singular values of ``M`` in non-ascending order."""
    return np.linalg.svd(as_matrix(M), compute_uv=False)


def _weights_for(w, r):
    if not isinstance(w, WeightVector):
        w = WeightVector.of(w)
    if len(w) != r:
        raise DimensionError(f"need {r} weights, got {len(w)}")
    return w


def weighted_schatten_norm_p(M, w, p):
    """``sum_i w_i * sigma_i(M)**p``, the weighted Schatten p-norm to the power p."""
    M = as_matrix(M)
    if not (0.0 < p <= 1.0):
        raise DomainError(f"power p must lie in (0, 1], got {p!r}")
    s = singular_values(M)
    w = _weights_for(w, s.size)
    return float(np.sum(w.weights * s**p))


def wsnm_objective(X, Y, w, p, fidelity_scale=1.0):
    """``a*||X - Y||_F**2 + sum_i w_i*sigma_i(X)**p``."""
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    if X.shape != Y.shape:
        raise DimensionError(f"shape mismatch {X.shape} vs {Y.shape}")
    return fidelity_scale * float(np.sum((X - Y) ** 2)) + weighted_schatten_norm_p(X, w, p)


def shrink_spectrum(factors, w, p, fidelity_scale=1.0, allow_unordered=False, J=DEFAULT_ITERS):
    """Per-component GST of ``factors.s`` with effective weights ``w / (2a)``."""
    if not fidelity_scale > 0:
        raise DomainError(f"fidelity_scale must be positive, got {fidelity_scale!r}")
    w = _weights_for(w, factors.s.size)
    if not w.certified and not allow_unordered:
        raise OrderingError(
            "weights are not non-descending; pass allow_unordered=True to accept "
            "a result without the global-optimality guarantee"
        )
    return np.asarray(gst_solve(factors.s, w.weights / (2.0 * fidelity_scale), p, J), dtype=float)


def wsnm_prox_spectrum(Y, w, p, fidelity_scale=1.0, allow_unordered=False, J=DEFAULT_ITERS):
    """Factors of ``Y`` and the shrunk spectrum used by :func:`wsnm_prox`."""
    factors = svd(Y)
    return factors, shrink_spectrum(factors, w, p, fidelity_scale, allow_unordered, J)


def wsnm_prox(Y, w, p, fidelity_scale=1.0, allow_unordered=False, J=DEFAULT_ITERS):
    """Proximal operator of the weighted Schatten p-norm.

    Minimizes ``a*||X - Y||_F**2 + sum_i w_i*sigma_i(X)**p`` with
    ``a = fidelity_scale``.  The answer ``U @ diag(delta) @ V.T`` is the
    global minimizer when ``w`` is non-descending.

    Raises
    ------
    OrderingError
        If ``w`` is not non-descending and ``allow_unordered`` is false.
    DimensionError
        If ``len(w) != min(Y.shape)``.
    """
    factors, delta = wsnm_prox_spectrum(Y, w, p, fidelity_scale, allow_unordered, J)
    return (factors.U * delta) @ factors.V.T


def svt(Y, tau):
    """Singular value soft thresholding ``U @ diag(max(s - tau, 0)) @ V.T``."""
    factors = svd(Y)
    return (factors.U * np.maximum(factors.s - tau, 0.0)) @ factors.V.T


def von_neumann_gap(A, B):
    """Return ``(tr(A.T @ B), sum_i sigma_i(A)*sigma_i(B))``.

    The first never exceeds the second.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape != B.shape:
        raise DimensionError(f"shape mismatch {A.shape} vs {B.shape}")
    return float(np.sum(A * B)), float(singular_values(A) @ singular_values(B))
