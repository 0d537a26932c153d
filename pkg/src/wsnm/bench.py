"""Synthetic low-rank + sparse benchmarks and foreground metrics.

Covers the data generator, recovery error metrics, the rank tables at fixed
corruption, the (rank fraction, corruption fraction) phase sweep with CSV
output, and the simple foreground pipeline for background subtraction.
"""

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError, DomainError, WsnmError
from .rng import SplitMix64, derive_seed
from .rpca import RpcaConfig, nnm_rpca, wsnm_rpca

CSV_HEADER = ("p_r", "p_e", "method", "repeat", "rel_err", "log_rel_err", "est_rank", "iters", "seconds")
SUCCESS_THRESHOLD = 1e-4
MAD_SCALE = 1.4826


def round_half_up(x):
    return int(math.floor(x + 0.5 + 1e-9))


@dataclass
class SyntheticSpec:
    m: int
    rank_fraction: float
    corruption_fraction: float
    corruption_magnitude: float = 50.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.rank_fraction < 1:
            raise DomainError(f"rank_fraction must lie in (0, 1), got {self.rank_fraction!r}")
        if not 0 <= self.corruption_fraction < 1:
            raise DomainError(f"corruption_fraction must lie in [0, 1), got {self.corruption_fraction!r}")
        if self.rank < 1:
            raise DomainError("m * rank_fraction must round to at least 1")
        if self.rank >= self.m:
            raise DomainError(f"rank {self.rank} must be below m = {self.m}")

    @property
    def rank(self):
        return round_half_up(self.m * self.rank_fraction)

    @property
    def corrupted(self):
        return round_half_up(self.m * self.m * self.corruption_fraction)


def gen_lowrank_sparse(spec):
    """Return ``(X, E, Y)`` with ``X = A @ B.T`` Gaussian of rank r and sparse ``E``.

    ``E`` has exactly ``spec.corrupted`` nonzeros at distinct positions chosen
    by a seeded Fisher-Yates shuffle, valued uniformly in
    ``[-magnitude, magnitude]``.
    """
    m, r = spec.m, spec.rank
    rng = SplitMix64(spec.seed)
    A = rng.normal(m * r).reshape(m, r)
    B = rng.normal(m * r).reshape(m, r)
    X = A @ B.T
    E = np.zeros(m * m)
    positions = rng.sample_without_replacement(m * m, spec.corrupted)
    E[positions] = rng.uniform_range(-spec.corruption_magnitude, spec.corruption_magnitude, positions.size)
    E = E.reshape(m, m)
    return X, E, X + E


def relative_error(X_hat, X):
    """``||X_hat - X||_F**2 / ||X||_F**2``."""
    X_hat = np.asarray(X_hat, dtype=float)
    X = np.asarray(X, dtype=float)
    if X_hat.shape != X.shape:
        raise DimensionError(f"shape mismatch {X_hat.shape} vs {X.shape}")
    denom = float(np.sum(X**2))
    if denom == 0:
        raise DomainError("ground truth is zero")
    return float(np.sum((X_hat - X) ** 2)) / denom


def log_relative_error(X_hat, X):
    """Natural log of :func:`relative_error`; ``-inf`` for an exact recovery."""
    ratio = relative_error(X_hat, X)
    return -math.inf if ratio == 0 else math.log(ratio)


def parse_method(method):
    """``"nnm"`` or ``"wsnm"``/``"wsnm:<p>"`` to ``(kind, p)``."""
    kind, _, arg = method.partition(":")
    if kind == "nnm" and not arg:
        return "nnm", 1.0
    if kind == "wsnm":
        p = float(arg) if arg else 0.7
        if not 0 < p <= 1:
            raise DomainError(f"power in {method!r} must lie in (0, 1]")
        return "wsnm", p
    raise DomainError(f"unknown method {method!r}; expected nnm or wsnm[:p]")


def solve(method, Y, rho=1.2, tol=1e-7, max_iters=500):
    kind, p = parse_method(method)
    if kind == "nnm":
        return nnm_rpca(Y, rho=rho, tol=tol, max_iters=max_iters)
    return wsnm_rpca(Y, RpcaConfig(p=p, rho=rho, tol=tol, max_iters=max_iters))


@dataclass
class SweepRecord:
    p_r: float
    p_e: float
    method: str
    repeat: int
    rel_err: float
    log_rel_err: float
    est_rank: float
    iters: int
    seconds: float
    error: str = ""


@dataclass
class SweepReport:
    """Per-(cell, method, repeat) records plus per-cell summaries."""

    records: list = field(default_factory=list)
    m: int = 0
    threshold: float = SUCCESS_THRESHOLD

    def cell(self, p_r, p_e, method):
        rows = [r for r in self.records if r.p_r == p_r and r.p_e == p_e and r.method == method]
        good = [r for r in rows if not r.error]
        if not good:
            return None
        mean_err = float(np.mean([r.rel_err for r in good]))
        return {
            "mean_rel_err": mean_err,
            "mean_log_rel_err": float(np.mean([r.log_rel_err for r in good])),
            "mean_rank": float(np.mean([r.est_rank for r in good])),
            "success": mean_err <= self.threshold,
        }

    def cells(self):
        return sorted({(r.p_r, r.p_e) for r in self.records})

    def methods(self):
        seen = []
        for r in self.records:
            if r.method not in seen:
                seen.append(r.method)
        return seen

    def success_count(self, method):
        return sum(1 for pr, pe in self.cells() if (self.cell(pr, pe, method) or {}).get("success"))

    def to_csv(self, timings=True):
        """CSV text; ``timings=False`` writes 0 seconds for reproducible bytes."""
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.records:
            writer.writerow([
                _g(r.p_r), _g(r.p_e), r.method, r.repeat, _g(r.rel_err), _g(r.log_rel_err),
                _g(r.est_rank), r.iters, _g(r.seconds if timings else 0.0),
            ])
        return out.getvalue()


def _g(x):
    return format(float(x), ".9g")


def _run_one(m, p_r, p_e, method, repeat, seed, rho, tol, max_iters):
    spec = SyntheticSpec(m, p_r, p_e, seed=seed)
    X, _, Y = gen_lowrank_sparse(spec)
    start = time.perf_counter()
    try:
        result = solve(method, Y, rho=rho, tol=tol, max_iters=max_iters)
    except WsnmError as exc:
        return SweepRecord(p_r, p_e, method, repeat, math.nan, math.nan, math.nan, 0,
                           time.perf_counter() - start, error=str(exc))
    return SweepRecord(
        p_r, p_e, method, repeat, relative_error(result.X, X), log_relative_error(result.X, X),
        result.estimated_rank, result.iterations, time.perf_counter() - start,
    )


def _execute(jobs, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda job: _run_one(*job), jobs))
    return [_run_one(*job) for job in jobs]


def run_phase_sweep(pr_values, pe_values, repeats=2, methods=("nnm", "wsnm:0.7"), m=150,
                    base_seed=0, rho=1.2, tol=1e-7, max_iters=500, threads=1):
    """Evaluate every method on every (P_r, P_e) cell.

    The data seed of a run depends only on ``(base_seed, P_r index, P_e
    index, repeat)``, and every method sees the same data, so the report is
    identical whether jobs run threaded or sequentially.
    """
    if repeats < 1:
        raise DomainError("repeats must be at least 1")
    for v in list(pr_values) + list(pe_values):
        if not 0 < v < 1:
            raise DomainError(f"fractions must lie in (0, 1), got {v!r}")
    for method in methods:
        parse_method(method)
    jobs = []
    for i, p_r in enumerate(pr_values):
        for j, p_e in enumerate(pe_values):
            for rep in range(repeats):
                seed = derive_seed(base_seed, i, j, rep)
                for method in methods:
                    jobs.append((m, p_r, p_e, method, rep, seed, rho, tol, max_iters))
    return SweepReport(_execute(jobs, threads), m=m)


def run_table(ranks, p_e, methods=("nnm", "wsnm:0.7"), repeats=3, m=300, base_seed=0,
              rho=1.2, tol=1e-7, max_iters=500, threads=1):
    """Rank table at fixed corruption; ``ranks`` are absolute ranks."""
    return run_phase_sweep([r / m for r in ranks], [p_e], repeats, methods, m, base_seed,
                           rho, tol, max_iters, threads)


def frange(start, stop, step):
    """Inclusive float grid rounded to 10 decimals."""
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 10) for k in range(count)]


# -- background subtraction -------------------------------------------------

def video_to_matrix(frames):
    """Stack frames as columns (each frame flattened row-major)."""
    frames = [np.asarray(f, dtype=float) for f in frames]
    if not frames:
        raise DimensionError("need at least one frame")
    shape = frames[0].shape
    for f in frames:
        if f.shape != shape:
            raise DimensionError(f"frame shape {f.shape} differs from {shape}")
    return np.column_stack([f.ravel() for f in frames])


def matrix_to_frames(M, height, width):
    M = np.asarray(M)
    if M.shape[0] != height * width:
        raise DimensionError(f"{M.shape[0]} rows cannot form {height}x{width} frames")
    return [M[:, j].reshape(height, width) for j in range(M.shape[1])]


def binarize_foreground(E, height, width, theta=3.0):
    """Boolean masks ``|e| > theta * s`` per frame column of ``E``.

    ``s`` is 1.4826 times the median absolute entry over the columns of
    ``E`` that contain any nonzero.
    """
    if not theta > 0:
        raise DomainError(f"theta must be positive, got {theta!r}")
    E = np.asarray(E, dtype=float)
    active = np.any(E != 0, axis=0)
    if not np.any(active):
        return [np.zeros((height, width), dtype=bool) for _ in range(E.shape[1])]
    scale = MAD_SCALE * float(np.median(np.abs(E[:, active])))
    mask = np.abs(E) > theta * scale
    return matrix_to_frames(mask, height, width)


def foreground_similarity(A, B):
    """``|A & B| / |A | B|``; 1 when both masks are empty."""
    A = np.asarray(A, dtype=bool)
    B = np.asarray(B, dtype=bool)
    if A.shape != B.shape:
        raise DimensionError(f"mask shape mismatch {A.shape} vs {B.shape}")
    union = np.count_nonzero(A | B)
    if union == 0:
        return 1.0
    return np.count_nonzero(A & B) / union


def moving_box_sequence(height=32, width=32, frames=20, box=6, contrast=120.0, seed=0):
    """Static textured background with a bright box sliding diagonally.

    Returns ``(frames, background, masks)``.
    """
    rng = SplitMix64(seed)
    yy, xx = np.mgrid[0:height, 0:width]
    background = 80.0 + 40.0 * np.sin(xx / 5.0) * np.cos(yy / 7.0)
    background += rng.uniform_range(-5.0, 5.0, height * width).reshape(height, width)
    seq, masks = [], []
    for t in range(frames):
        top = (t * (height - box)) // max(frames - 1, 1)
        left = (t * 2 * (width - box)) // max(frames - 1, 1) % (width - box + 1)
        mask = np.zeros((height, width), dtype=bool)
        mask[top:top + box, left:left + box] = True
        frame = background.copy()
        frame[mask] = np.clip(background[mask] + contrast, 0, 255)
        seq.append(frame)
        masks.append(mask)
    return seq, background, masks
