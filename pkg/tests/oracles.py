"""Brute-force reference solvers used only by the tests."""

import numpy as np


def scalar_objective(delta, sigma, lam, p):
    return 0.5 * (delta - abs(sigma)) ** 2 + lam * np.abs(delta) ** p


def grid_minimum(sigma, lam, p, points=100_001):
    """Minimum of the scalar objective over a uniform grid on [0, |sigma|]."""
    grid = np.linspace(0.0, abs(sigma), points)
    values = scalar_objective(grid, sigma, lam, p)
    i = int(np.argmin(values))
    return grid[i], values[i]


def refined_minimizer(sigma, lam, p, points=1_000_001):
    """Grid argmin refined by bisection on the stationarity residual."""
    best, _ = grid_minimum(sigma, lam, p, points)
    if best == 0.0:
        return 0.0
    step = abs(sigma) / (points - 1)
    lo, hi = max(best - step, 1e-300), min(best + step, abs(sigma))

    def g(d):
        return d - abs(sigma) + lam * p * d ** (p - 1)

    if g(lo) > 0 or g(hi) < 0:
        return best
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def coupled_2x2_grid(s1, s2, w, p, a, step=1e-4, upper=None):
    """Minimize a*((d1-s1)^2 + (d2-s2)^2) + w1*d1^p + w2*d2^p over d1 >= d2 >= 0.

    For diagonal Y and diagonal X the fidelity term decouples; the ordering
    constraint is what couples the two coordinates.
    """
    upper = max(s1, s2) if upper is None else upper
    grid = np.arange(0.0, upper + step / 2, step)
    f1 = a * (grid - s1) ** 2 + w[0] * grid ** p
    f2 = a * (grid - s2) ** 2 + w[1] * grid ** p
    # best d2 <= d1 for every d1 is a running minimum of f2
    run_min = np.minimum.accumulate(f2)
    run_arg = np.zeros(grid.size, dtype=int)
    for i in range(1, grid.size):
        run_arg[i] = i if f2[i] < f2[run_arg[i - 1]] else run_arg[i - 1]
    total = f1 + run_min
    i = int(np.argmin(total))
    d1, d2 = grid[i], grid[run_arg[i]]
    if d1 - d2 > 2 * step:
        # Constraint inactive: polish each coordinate inside its grid cell.
        d1 = _ternary(lambda d: a * (d - s1) ** 2 + w[0] * d ** p, d1 - step, d1 + step)
        if d2 > 0:
            d2 = _ternary(lambda d: a * (d - s2) ** 2 + w[1] * d ** p, d2 - step, d2 + step)
    value = a * ((d1 - s1) ** 2 + (d2 - s2) ** 2) + w[0] * d1 ** p + w[1] * d2 ** p
    return d1, d2, value


def _ternary(f, lo, hi, iters=200):
    lo = max(lo, 0.0)
    for _ in range(iters):
        m1, m2 = lo + (hi - lo) / 3, hi - (hi - lo) / 3
        if f(m1) <= f(m2):
            hi = m2
        else:
            lo = m1
    return 0.5 * (lo + hi)


def random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))
