"""Whole-curve density tracking on a one-dimensional grid.

The estimate is a vector z_1..z_M of density values at grid points. Each step
moves every grid value toward the scaled kernel at the new sample and then
projects onto

    G = {y : lower_i <= y_i <= upper_i, and sum_i w_i y_i = 1 if normalized}

in the weighted norm ||v||^2 = sum_i h_i w_i v_i^2. The normalized projection
is y_i(lam) = clamp(z_i + lam / h_i, lower_i, upper_i) with the scalar lam
chosen so the weighted sum hits one; the sum is monotone and piecewise linear
in lam.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .kernels import KernelSpec

BISECTION_TOL = 1e-12
MAX_BISECTIONS = 200


class InfeasibleProjection(ValueError):
    def __init__(self, message: str, direction: str):
        super().__init__(message)
        self.direction = direction


@dataclass(frozen=True)
class GridSpec:
    points: np.ndarray
    weights: np.ndarray
    aux: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        w = np.broadcast_to(np.asarray(self.weights, dtype=np.float64), pts.shape).copy()
        h = np.broadcast_to(np.asarray(self.aux, dtype=np.float64), pts.shape).copy()
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least two points")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if np.any(w <= 0) or np.any(h <= 0):
            raise ValueError("grid weights and auxiliary density must be positive")
        for name, arr in (("points", pts), ("weights", w), ("aux", h)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def uniform(cls, a: float, b: float, m: int) -> "GridSpec":
        """Midpoint grid of ``m`` cells on [a, b] with weights (b - a)/m and uniform h."""
        if not b > a or m < 2:
            raise ValueError("need b > a and at least two points")
        step = (b - a) / m
        pts = a + step * (np.arange(m) + 0.5)
        return cls(pts, np.full(m, step), np.full(m, 1.0 / (b - a)))

    @property
    def size(self) -> int:
        return self.points.size

    def describe(self) -> dict:
        return {
            "grid_lo": float(self.points[0] - self.weights[0] / 2),
            "grid_hi": float(self.points[-1] + self.weights[-1] / 2),
            "grid_m": self.size,
        }


@dataclass(frozen=True)
class GridEstimate:
    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    normalized: bool = True


def _clamp_at(values, lam, aux, lower, upper):
    return np.minimum(np.maximum(values + lam[..., None] / aux, lower), upper)


def check_feasible(grid: GridSpec, lower, upper):
    lo_mass = float(np.sum(grid.weights * lower))
    hi_mass = float(np.sum(grid.weights * upper))
    if lo_mass > 1.0 + BISECTION_TOL:
        raise InfeasibleProjection(f"lower bounds carry mass {lo_mass!r} > 1", "lower")
    if hi_mass < 1.0 - BISECTION_TOL:
        raise InfeasibleProjection(f"upper bounds carry mass {hi_mass!r} < 1", "upper")


def project_onto_G(values, grid: GridSpec, lower, upper, normalized: bool = True, method: str = "bisection") -> np.ndarray:
    """Weighted Euclidean projection onto box bounds, optionally with sum w y = 1.

    ``values`` may carry leading batch axes; each row is projected separately.
    ``method="bisection"`` searches the multiplier by bisection;
    ``method="breakpoints"`` evaluates the piecewise-linear constraint at every
    kink and solves the bracketing linear piece directly (O(M^2) per row,
    faster for small grids).
    """
    if method not in ("bisection", "breakpoints"):
        raise ValueError(f"unknown projection method {method!r}")
    z = np.asarray(values, dtype=np.float64)
    m = grid.size
    lower = np.broadcast_to(np.asarray(lower, dtype=np.float64), (m,))
    upper = np.broadcast_to(np.asarray(upper, dtype=np.float64), (m,))
    if np.any(lower > upper):
        raise InfeasibleProjection("a lower bound exceeds its upper bound", "box")
    if z.shape[-1] != m:
        raise ValueError(f"expected {m} grid values, got {z.shape[-1]}")
    if not normalized:
        return np.minimum(np.maximum(z, lower), upper)
    check_feasible(grid, lower, upper)
    if method == "breakpoints":
        return _project_breakpoints(z, grid, lower, upper)
    w, h = grid.weights, grid.aux
    batch = z.shape[:-1]

    def residual(lam):
        return np.sum(w * _clamp_at(z, lam, h, lower, upper), axis=-1) - 1.0

    # extreme shifts that pin every coordinate at a bound
    finite_lo = np.where(np.isfinite(lower), lower, z)
    finite_hi = np.where(np.isfinite(upper), upper, z)
    lam_lo = np.min(h * (finite_lo - z), axis=-1) - 1.0
    lam_hi = np.max(h * (finite_hi - z), axis=-1) + 1.0
    lam_lo = np.broadcast_to(lam_lo, batch).copy()
    lam_hi = np.broadcast_to(lam_hi, batch).copy()
    # unbounded coordinates need the bracket widened until it straddles the root
    for _ in range(MAX_BISECTIONS):
        lo_bad = residual(lam_lo) > 0
        hi_bad = residual(lam_hi) < 0
        if not (lo_bad.any() or hi_bad.any()):
            break
        lam_lo = np.where(lo_bad, 2 * lam_lo - np.abs(lam_hi) - 1.0, lam_lo)
        lam_hi = np.where(hi_bad, 2 * lam_hi + np.abs(lam_lo) + 1.0, lam_hi)
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lam_lo + lam_hi)
        res = residual(mid)
        below = res < 0
        lam_lo = np.where(below, mid, lam_lo)
        lam_hi = np.where(below, lam_hi, mid)
        if np.all(np.abs(res) <= BISECTION_TOL) or np.all(lam_hi - lam_lo <= 0):
            break
    return _polish(z, mid, grid, lower, upper, lam_lo, lam_hi)


def _project_breakpoints(z, grid, lower, upper):
    w, h = grid.weights, grid.aux
    kinks = np.concatenate([h * (lower - z), h * (upper - z)], axis=-1)
    kinks = np.where(np.isfinite(kinks), kinks, np.nan)
    kinks = np.sort(kinks, axis=-1)
    # sums at every kink; nan (infinite bound) entries sort last and are ignored
    filled = np.where(np.isnan(kinks), 0.0, kinks)
    y = np.minimum(np.maximum(z[..., None, :] + filled[..., :, None] / h, lower), upper)
    sums = np.sum(w * y, axis=-1) - 1.0
    reached = (sums >= 0) & ~np.isnan(kinks)
    # first kink whose residual reaches zero; the root lies on the piece to its left
    idx = np.argmax(reached, axis=-1)
    none_reached = ~np.any(reached, axis=-1)
    hi = np.take_along_axis(filled, idx[..., None], axis=-1)[..., 0]
    lo = np.take_along_axis(filled, np.maximum(idx - 1, 0)[..., None], axis=-1)[..., 0]
    first = (idx == 0) & ~none_reached
    last = np.nanmax(kinks, axis=-1)
    # outside the outermost kinks the clamp pattern is constant, so any point there will do
    lam = np.where(first, hi - 1.0, np.where(none_reached, last + 1.0, 0.5 * (lo + hi)))
    lo = np.where(first, -np.inf, np.where(none_reached, last, lo))
    hi = np.where(none_reached, np.inf, hi)
    return _polish(z, lam, grid, lower, upper, lo, hi)


def _polish(z, lam, grid, lower, upper, lam_lo, lam_hi):
    """Solve the equality exactly on the clamp pattern at ``lam``.

    The exact multiplier is kept only if it stays inside the bracket
    [lam_lo, lam_hi] known to contain the root; otherwise the pattern at
    ``lam`` was not the one at the root and ``lam`` itself is returned.
    """
    w, h = grid.weights, grid.aux
    y = _clamp_at(z, lam, h, lower, upper)
    free = (z + lam[..., None] / h > lower) & (z + lam[..., None] / h < upper)
    fixed_mass = np.sum(np.where(free, 0.0, w * y), axis=-1)
    free_mass = np.sum(np.where(free, w * z, 0.0), axis=-1)
    slope = np.sum(np.where(free, w / h, 0.0), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = (1.0 - fixed_mass - free_mass) / slope
    slack = 1e-9 * (1.0 + np.abs(lam))
    inside = (slope > 0) & (exact >= lam_lo - slack) & (exact <= lam_hi + slack)
    y_exact = _clamp_at(z, np.where(inside, exact, lam), h, lower, upper)
    ok = np.abs(np.sum(w * y_exact, axis=-1) - 1.0) <= np.abs(np.sum(w * y, axis=-1) - 1.0)
    return np.where(ok[..., None], y_exact, y)


def grid_sqg_step(
    est: GridEstimate,
    grid: GridSpec,
    sample: float,
    rho: float,
    theta: float,
    kernel: KernelSpec,
) -> GridEstimate:
    if not np.isfinite(sample):
        raise ValueError("sample must be finite")
    if not (rho > 0 and theta > 0):
        raise ValueError("rho and theta must be positive")
    if kernel.dim != 1:
        raise ValueError("grid tracking is one-dimensional")
    kv = kernel((sample - grid.points) / theta) / theta
    raw = est.values - rho * (est.values - kv)
    new = project_onto_G(raw, grid, est.lower, est.upper, est.normalized)
    return replace(est, values=new)


def weighted_ise(values, truth, grid: GridSpec) -> np.ndarray:
    """sum_i h_i w_i (z_i - g_i)^2 along the last axis."""
    d = np.asarray(values) - np.asarray(truth)
    return np.sum(grid.aux * grid.weights * d * d, axis=-1)


def uniform_start(grid: GridSpec, lower, upper, normalized: bool = True) -> GridEstimate:
    """Flat curve with unit mass, projected into the constraint set."""
    total = float(np.sum(grid.weights))
    flat = np.full(grid.size, 1.0 / total)
    lower = np.broadcast_to(np.asarray(lower, dtype=np.float64), (grid.size,)).copy()
    upper = np.broadcast_to(np.asarray(upper, dtype=np.float64), (grid.size,)).copy()
    return GridEstimate(project_onto_G(flat, grid, lower, upper, normalized), lower, upper, normalized)
