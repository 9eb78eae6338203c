"""Independent reference computations used by the tests."""
import itertools

import numpy as np


def qp_projection_bruteforce(z, w, h, lower, upper, tol=1e-12):
    """Minimise sum h w (z - y)^2 over the box with sum w y = 1 by trying every clamp pattern.

    Each coordinate is pinned at its lower bound, pinned at its upper bound,
    or free. Free coordinates follow y_i = z_i + lam / h_i with lam fixed by
    the equality constraint. The best feasible candidate wins.
    """
    z, w, h = (np.asarray(a, dtype=np.float64) for a in (z, w, h))
    lower = np.broadcast_to(np.asarray(lower, dtype=np.float64), z.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=np.float64), z.shape)
    best, best_obj = None, np.inf
    for pattern in itertools.product((0, 1, 2), repeat=z.size):
        pat = np.array(pattern)
        y = np.where(pat == 0, lower, np.where(pat == 2, upper, z))
        free = pat == 1
        fixed_mass = float(np.sum(w[~free] * y[~free]))
        if free.any():
            lam = (1.0 - fixed_mass - float(np.sum(w[free] * z[free]))) / float(np.sum(w[free] / h[free]))
            y = np.where(free, z + lam / h, y)
        elif abs(fixed_mass - 1.0) > 1e-9:
            continue
        if np.any(y < lower - tol) or np.any(y > upper + tol):
            continue
        obj = float(np.sum(h * w * (z - y) ** 2))
        if obj < best_obj - 1e-15:
            best, best_obj = y, obj
    return best


def simulate_ar1_variance(rho, k, sigma2=1.0):
    """Stationary variance of z_{t+1} = (1 - rho) z_t + rho e_t and of its running mean after k / rho steps."""
    a = 1 - rho
    var_z = rho * sigma2 / (2 - rho)
    n = int(round(k / rho))
    # Cesaro mean of n stationary AR(1) terms
    lags = np.arange(1, n)
    var_mean = var_z / n * (1 + 2 * np.sum((1 - lags / n) * a**lags))
    return var_z, var_mean


def ar1_from_start_variance(rho, n, sigma2=1.0):
    """Exact variances after n steps of z_{i+1} = (1 - rho) z_i + rho e_i from a fixed start.

    Returns (Var z_n, Var of the equally weighted mean of z_1..z_n).
    """
    a = 1 - rho
    m = np.arange(1, n + 1)
    var_z = sigma2 * rho**2 * np.sum(a ** (2 * np.arange(n)))
    var_mean = sigma2 * np.sum((1 - a**m) ** 2) / n**2
    return float(var_z), float(var_mean)
