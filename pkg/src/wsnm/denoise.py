"""Nonlocal patch-group denoising with weighted Schatten p-norm shrinkage.

Each outer iteration adds a fraction of the residual back to the current
estimate, groups similar patches around regularly spaced key patches,
shrinks every group spectrally and averages the overlapping estimates.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import DimensionError, DomainError
from .gst import DEFAULT_ITERS, gst_solve
from .image import as_image, clamp
from .linalg import WeightVector, as_matrix, wsnm_prox

WEIGHT_EPS = 1e-16
CHUNK = 256

# (sigma_n upper bound, patch_size, group_size, K)
_SIZE_BUCKETS = ((20, 6, 70, 8), (40, 7, 90, 12), (60, 8, 120, 14), (math.inf, 9, 140, 14))
_POWER_BUCKETS = ((20, 1.0), (30, 0.85), (50, 0.75), (60, 0.7), (75, 0.1), (math.inf, 0.05))


def select_power(sigma_n):
    """Default power for a noise level: smaller p for stronger noise."""
    if not sigma_n > 0:
        raise DomainError(f"sigma_n must be positive, got {sigma_n!r}")
    for bound, p in _POWER_BUCKETS:
        if sigma_n <= bound:
            return p


def _size_defaults(sigma_n):
    for bound, patch, group, iters in _SIZE_BUCKETS:
        if sigma_n <= bound:
            return patch, group, iters


def default_c(sigma_n):
    return 2.0 * math.sqrt(2.0) * sigma_n**2


@dataclass
class DenoiseConfig:
    """Denoiser parameters; ``None`` fields take noise-dependent defaults.

    ``c`` is in pixel-variance units (default ``2*sqrt(2)*sigma_n**2``).
    ``gamma`` scales the per-iteration noise re-estimate.  ``center_groups``
    removes each group's mean patch before shrinkage and adds it back after.
    """

    sigma_n: float
    p: float = None
    K: int = None
    alpha: float = 0.1
    patch_size: int = None
    group_size: int = None
    search_window: int = 30
    key_patch_step: int = 3
    c: float = None
    reestimate_noise: bool = True
    gamma: float = 1.0
    center_groups: bool = False
    gst_iters: int = DEFAULT_ITERS
    threads: int = 1

    def __post_init__(self):
        if not self.sigma_n >= 0:
            raise DomainError(f"sigma_n must be non-negative, got {self.sigma_n!r}")
        patch, group, iters = _size_defaults(self.sigma_n)
        if self.p is None:
            self.p = select_power(self.sigma_n) if self.sigma_n > 0 else 1.0
        self.patch_size = patch if self.patch_size is None else self.patch_size
        self.group_size = group if self.group_size is None else self.group_size
        self.K = iters if self.K is None else self.K
        if self.c is None:
            self.c = default_c(self.sigma_n)
        if not 0 < self.p <= 1:
            raise DomainError(f"p must lie in (0, 1], got {self.p!r}")
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        for name in ("K", "patch_size", "group_size", "search_window", "key_patch_step", "threads"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise DomainError(f"{name} must be a positive integer, got {value!r}")
        if self.patch_size > self.search_window:
            raise DomainError("patch_size must not exceed search_window")
        if self.c < 0 or self.gamma < 0:
            raise DomainError("c and gamma must be non-negative")


@dataclass
class PatchGroup:
    """Similar patches as columns of ``matrix`` (d x n); column 0 is the key."""

    matrix: np.ndarray
    positions: np.ndarray
    reference_index: int = 0


def iterate_regularization(y, x_prev, alpha):
    """``x_prev + alpha*(y - x_prev)``."""
    y, x_prev = as_image(y), as_image(x_prev)
    if y.shape != x_prev.shape:
        raise DimensionError(f"shape mismatch {y.shape} vs {x_prev.shape}")
    return x_prev + alpha * (y - x_prev)


def estimate_group_weights(sigma_vals, sigma_n, n, p, c=None, eps=WEIGHT_EPS):
    """Weights inversely proportional to estimated clean singular values.

    The clean spectrum is estimated as ``sqrt(max(s**2 - n*sigma_n**2, 0))``
    and ``w_j = c*sqrt(n) / (delta_j**(1/p) + eps)``.  A non-ascending
    ``sigma_vals`` gives non-descending weights.
    """
    sigma_vals = np.asarray(sigma_vals, dtype=float)
    if c is None:
        c = default_c(sigma_n)
    return WeightVector.of(_weights(sigma_vals, sigma_n, n, p, c, eps))


def _weights(s, sigma_n, n, p, c, eps=WEIGHT_EPS):
    delta = np.sqrt(np.maximum(s**2 - n * sigma_n**2, 0.0))
    return c * math.sqrt(n) / (delta ** (1.0 / p) + eps)


def denoise_patch_group(group, sigma_n, p, c=None, center=False, J=DEFAULT_ITERS):
    """Shrink one group: minimizer of ``||Y - X||_F**2 + sum_j w_j*sigma_j(X)**p``.

    ``c`` carries the noise variance, so the fidelity term is unscaled.
    With ``center`` the mean column is removed first and restored after.
    """
    Y = as_matrix(group.matrix if isinstance(group, PatchGroup) else group, "group")
    if sigma_n == 0:
        return Y.copy()
    mean = Y.mean(axis=1, keepdims=True) if center else 0.0
    Yc = Y - mean
    s = np.linalg.svd(Yc, compute_uv=False)
    w = estimate_group_weights(s, sigma_n, Y.shape[1], p, c)
    return wsnm_prox(Yc, w, p, fidelity_scale=1.0, J=J) + mean


def _shrink_batch(Y, sigma_n, p, c, center, J):
    # Y has shape (B, d, n).  Spectra come from the smaller Gram matrix.
    B, d, n = Y.shape
    mean = Y.mean(axis=2, keepdims=True) if center else 0.0
    Yc = Y - mean
    if d <= n:
        gram = Yc @ Yc.transpose(0, 2, 1)
    else:
        gram = Yc.transpose(0, 2, 1) @ Yc
    evals, evecs = np.linalg.eigh(gram)
    s = np.sqrt(np.maximum(evals[:, ::-1], 0.0))
    Q = evecs[:, :, ::-1]
    w = _weights(s, sigma_n, n, p, c)
    delta = np.asarray(gst_solve(s, w / 2.0, p, J), dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(s > 0, delta / np.where(s > 0, s, 1.0), 0.0)
    if d <= n:
        X = (Q * ratio[:, None, :]) @ (Q.transpose(0, 2, 1) @ Yc)
    else:
        X = (Yc @ Q * ratio[:, None, :]) @ Q.transpose(0, 2, 1)
    return X + mean


def patch_stack(img, patch_size):
    """All patches as an array of shape (H-ps+1, W-ps+1, ps*ps)."""
    img = as_image(img)
    if patch_size > min(img.shape):
        raise DimensionError(f"patch size {patch_size} exceeds image {img.shape}")
    view = sliding_window_view(img, (patch_size, patch_size))
    return view.reshape(view.shape[0], view.shape[1], -1)


def _window(center, size, limit):
    lo = max(center - size // 2, 0)
    hi = min(center - size // 2 + size - 1, limit)
    return lo, hi


def _match(patches, anchor, search_window, group_size):
    rows, cols = patches.shape[:2]
    r, c = anchor
    r0, r1 = _window(r, search_window, rows - 1)
    c0, c1 = _window(c, search_window, cols - 1)
    cand = patches[r0:r1 + 1, c0:c1 + 1]
    dist = np.sum((cand - patches[r, c]) ** 2, axis=2).ravel()
    ri, ci = np.divmod(np.arange(dist.size), c1 - c0 + 1)
    ri += r0
    ci += c0
    anchor_flat = (r - r0) * (c1 - c0 + 1) + (c - c0)
    dist[anchor_flat] = -1.0
    # lexsort is stable, and the flat index is already raster order.
    order = np.argsort(dist, kind="stable")[:group_size]
    return np.column_stack((ri[order], ci[order]))


def block_match(img, anchor, cfg):
    """Group of the ``cfg.group_size`` patches most similar to the one at ``anchor``.

    Candidates lie in a ``search_window`` square around the anchor, clipped
    to the image.  The anchor comes first; ties are broken by raster order.
    """
    patches = patch_stack(img, cfg.patch_size)
    r, c = anchor
    if not (0 <= r < patches.shape[0] and 0 <= c < patches.shape[1]):
        raise DimensionError(f"anchor {anchor} out of bounds")
    positions = _match(patches, (r, c), cfg.search_window, cfg.group_size)
    matrix = patches[positions[:, 0], positions[:, 1]].T.copy()
    return PatchGroup(matrix, positions, 0)


def key_positions(length, patch_size, step):
    """Key-patch offsets along one axis; the last valid offset is always included."""
    last = length - patch_size
    pos = list(range(0, last + 1, step))
    if pos[-1] != last:
        pos.append(last)
    return pos


def aggregate(groups, width, height, fallback=None):
    """Average every patch estimate into the pixels it covers.

    ``groups`` holds ``(matrix, positions)`` pairs or :class:`PatchGroup`
    objects.  Pixels no patch touches take ``fallback`` (zero if omitted).
    """
    total = np.zeros(height * width)
    count = np.zeros(height * width)
    for g in groups:
        matrix, positions = (g.matrix, g.positions) if isinstance(g, PatchGroup) else g
        _accumulate(total, count, np.asarray(matrix).T, np.asarray(positions), width, height)
    return _finish(total, count, width, height, fallback)


def _offsets(patch_size, width):
    dr, dc = np.divmod(np.arange(patch_size * patch_size), patch_size)
    return dr * width + dc


def _accumulate(total, count, patch_rows, positions, width, height):
    # patch_rows: (N, d) estimates, positions: (N, 2) top-left anchors.
    ps = int(round(math.sqrt(patch_rows.shape[1])))
    if ps * ps != patch_rows.shape[1]:
        raise DimensionError("patch length is not a perfect square")
    if np.any(positions < 0) or np.any(positions[:, 0] > height - ps) or np.any(positions[:, 1] > width - ps):
        raise DimensionError("patch position out of bounds")
    idx = (positions[:, 0] * width + positions[:, 1])[:, None] + _offsets(ps, width)[None, :]
    size = height * width
    total += np.bincount(idx.ravel(), weights=patch_rows.ravel(), minlength=size)
    count += np.bincount(idx.ravel(), minlength=size)


def _finish(total, count, width, height, fallback):
    out = np.zeros(height * width) if fallback is None else np.array(fallback, dtype=float).ravel()
    covered = count > 0
    out[covered] = total[covered] / count[covered]
    return out.reshape(height, width)


def working_sigma(y, y_k, sigma_n, gamma):
    """``gamma * sqrt(max(sigma_n**2 - mean((y - y_k)**2), 0))``."""
    return gamma * math.sqrt(max(sigma_n**2 - float(np.mean((y - y_k) ** 2)), 0.0))


def _denoise_pass(y_k, sigma, cfg):
    height, width = y_k.shape
    ps = cfg.patch_size
    patches = patch_stack(y_k, ps)
    anchors = [(r, c) for r in key_positions(height, ps, cfg.key_patch_step)
               for c in key_positions(width, ps, cfg.key_patch_step)]
    group_size = min(cfg.group_size, patches.shape[0] * patches.shape[1])
    c = cfg.c * (sigma / cfg.sigma_n) ** 2 if cfg.sigma_n > 0 else 0.0

    def run(chunk):
        pos = np.stack([_match(patches, a, cfg.search_window, group_size) for a in chunk])
        Y = patches[pos[..., 0], pos[..., 1]].transpose(0, 2, 1)
        if sigma > 0:
            Y = _shrink_batch(Y, sigma, cfg.p, c, cfg.center_groups, cfg.gst_iters)
        return Y.transpose(0, 2, 1).reshape(-1, ps * ps), pos.reshape(-1, 2)

    chunks = [anchors[i:i + CHUNK] for i in range(0, len(anchors), CHUNK)]
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(ch) for ch in chunks]
    total = np.zeros(height * width)
    count = np.zeros(height * width)
    for rows, pos in results:  # fixed chunk order keeps sums bit-identical
        _accumulate(total, count, rows, pos, width, height)
    return _finish(total, count, width, height, y_k)


def denoise_image(y, cfg, callback=None):
    """Denoise ``y`` for ``cfg.K`` outer iterations and clamp to [0, 255].

    Parameters
    ----------
    y : array_like, shape (H, W)
        Noisy image in pixel units.
    cfg : DenoiseConfig
    callback : callable, optional
        Called as ``callback(k, estimate, sigma_k)`` after every iteration.
    """
    y = as_image(y)
    if cfg.patch_size > min(y.shape):
        raise DimensionError(f"patch size {cfg.patch_size} exceeds image {y.shape}")
    x_hat = y.copy()
    for k in range(1, cfg.K + 1):
        y_k = iterate_regularization(y, x_hat, cfg.alpha)
        sigma = working_sigma(y, y_k, cfg.sigma_n, cfg.gamma) if cfg.reestimate_noise else cfg.sigma_n
        x_hat = _denoise_pass(y_k, sigma, cfg)
        if callback is not None:
            callback(k, x_hat, sigma)
    return clamp(x_hat)
