"""Recursive tracking of a vector regression function at a query point.

Observations are pairs (xbar, ybar) with ybar in R^m. One step with N pairs:

    xi     = (1 / (N theta^r)) sum_i K((xbar_i - x) / theta) (z - ybar_i)
    z_next = proj_Y(z - rho xi)

where Y is a box or a ball in R^m. Nadaraya-Watson estimates and the kernel
weighted least-squares objective are provided as batch baselines; the
quadrature objectives are used as test oracles.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .density import LargeStepWarning, _quad
from .kernels import DimensionError, KernelSpec, as_points
from .schedules import ScheduleSpec


class NoMassAtQuery(ArithmeticError):
    """Every kernel weight at the query point is zero."""


@dataclass(frozen=True)
class RegressionConstraint:
    kind: str
    lo: tuple = ()
    hi: tuple = ()
    center: tuple = ()
    radius: float = 0.0

    def __post_init__(self):
        if self.kind == "box":
            lo = np.asarray(self.lo, dtype=np.float64)
            hi = np.asarray(self.hi, dtype=np.float64)
            if lo.shape != hi.shape or lo.ndim != 1 or lo.size == 0:
                raise ValueError("box bounds must be vectors of equal length")
            if np.any(lo > hi) or not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
                raise ValueError("box must be nonempty and bounded")
        elif self.kind == "ball":
            if not (self.radius > 0 and math.isfinite(self.radius)) or len(self.center) == 0:
                raise ValueError("ball needs a center and a positive finite radius")
        else:
            raise ValueError(f"unknown constraint kind {self.kind!r}")

    @classmethod
    def box(cls, lo, hi) -> "RegressionConstraint":
        lo = tuple(float(v) for v in np.atleast_1d(lo))
        hi = tuple(float(v) for v in np.atleast_1d(hi))
        return cls("box", lo=lo, hi=hi)

    @classmethod
    def ball(cls, center, radius: float) -> "RegressionConstraint":
        return cls("ball", center=tuple(float(v) for v in np.atleast_1d(center)), radius=float(radius))

    @property
    def dim(self) -> int:
        return len(self.lo) if self.kind == "box" else len(self.center)

    @property
    def norm_bound(self) -> float:
        """sup of ||y|| over the set."""
        if self.kind == "box":
            corner = np.maximum(np.abs(self.lo), np.abs(self.hi))
            return float(np.linalg.norm(corner))
        return float(np.linalg.norm(self.center)) + self.radius

    def contains(self, v, tol: float = 0.0) -> bool:
        v = np.asarray(v, dtype=np.float64)
        if self.kind == "box":
            return bool(np.all(v >= np.asarray(self.lo) - tol) and np.all(v <= np.asarray(self.hi) + tol))
        return float(np.linalg.norm(v - np.asarray(self.center))) <= self.radius + tol

    def describe(self) -> dict:
        if self.kind == "box":
            return {"constraint": "box", "lo": list(self.lo), "hi": list(self.hi)}
        return {"constraint": "ball", "center": list(self.center), "radius": self.radius}


def project_Y(v, c: RegressionConstraint) -> np.ndarray:
    """Euclidean projection onto the box or ball; leading axes are batched."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != c.dim:
        raise DimensionError(f"expected vectors of length {c.dim}")
    if c.kind == "box":
        return np.minimum(np.maximum(v, np.asarray(c.lo)), np.asarray(c.hi))
    center = np.asarray(c.center)
    d = v - center
    norm = np.sqrt(np.sum(d * d, axis=-1, keepdims=True))
    scale = np.where(norm > c.radius, c.radius / np.where(norm > 0, norm, 1.0), 1.0)
    return center + d * scale


def regression_xi(z, kvals, ys, theta, dim: int):
    """(1 / (N theta^r)) sum_i K_i (z - y_i); kvals (..., N), ys (..., N, m)."""
    acc = kvals[..., 0, None] * (z - ys[..., 0, :])
    for i in range(1, kvals.shape[-1]):
        acc += kvals[..., i, None] * (z - ys[..., i, :])
    theta = np.asarray(theta, dtype=np.float64)
    return acc / kvals.shape[-1] * theta[..., None] ** (-dim)


@dataclass(frozen=True)
class RegressionTrackerState:
    x: tuple
    z: tuple
    t: int
    cesaro_num: tuple
    cesaro_den: float
    constraint: RegressionConstraint
    kernel: KernelSpec
    schedule: ScheduleSpec

    @classmethod
    def start(cls, x, kernel: KernelSpec, schedule, constraint: RegressionConstraint, z0=None):
        pt = as_points(x, kernel.dim).reshape(-1)
        if pt.size != kernel.dim:
            raise DimensionError("query point dimension does not match the kernel")
        if z0 is None:
            z0 = project_Y(np.zeros(constraint.dim), constraint)
        z0 = np.asarray(z0, dtype=np.float64).reshape(constraint.dim)
        if not constraint.contains(z0, 1e-12):
            raise ValueError("initial estimate outside the constraint set")
        zeros = (0.0,) * constraint.dim
        return cls(tuple(pt.tolist()), tuple(z0.tolist()), 0, zeros, 0.0, constraint, kernel, schedule)

    @property
    def point(self) -> np.ndarray:
        return np.asarray(self.x, dtype=np.float64)

    @property
    def estimate(self) -> np.ndarray:
        return np.asarray(self.z, dtype=np.float64)


def _check_pairs(batch, r: int, m: int):
    if len(batch) == 0:
        raise ValueError("batch must contain at least one pair")
    xs = np.array([np.asarray(p[0], dtype=np.float64).reshape(-1) for p in batch])
    ys = np.array([np.asarray(p[1], dtype=np.float64).reshape(-1) for p in batch])
    if xs.shape[1] != r or ys.shape[1] != m:
        raise DimensionError(f"pairs must have input dimension {r} and output dimension {m}")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise ValueError("batch contains non-finite observations")
    return xs, ys


def sqg_regression_step(state: RegressionTrackerState, batch) -> RegressionTrackerState:
    """``batch`` is a sequence of (xbar, ybar) pairs."""
    xs, ys = _check_pairs(batch, state.kernel.dim, state.constraint.dim)
    rho = state.schedule.rho_at(state.t)
    theta = state.schedule.theta_at(state.t)
    if rho > 1:
        warnings.warn(f"step rho_t = {rho} exceeds 1", LargeStepWarning, stacklevel=2)
    kvals = state.kernel((xs - state.point) / theta)
    z = state.estimate
    xi = regression_xi(z, kvals, ys, theta, state.kernel.dim)
    z_new = project_Y(z - rho * xi, state.constraint)
    num = np.asarray(state.cesaro_num) + rho * z_new
    return replace(
        state,
        z=tuple(z_new.tolist()),
        t=state.t + 1,
        cesaro_num=tuple(num.tolist()),
        cesaro_den=state.cesaro_den + rho,
    )


def cesaro_regression(state: RegressionTrackerState) -> np.ndarray:
    if state.t < 1 or state.cesaro_den == 0:
        raise ValueError("Cesaro average needs at least one completed step")
    return np.asarray(state.cesaro_num) / state.cesaro_den


def _weights(xs, x, theta, kernel):
    if not theta > 0:
        raise ValueError("window theta must be positive")
    xs = as_points(xs, kernel.dim).reshape(-1, kernel.dim)
    x = as_points(x, kernel.dim).reshape(1, kernel.dim)
    return kernel((xs - x) / theta)


def _split(samples, kernel):
    if len(samples) == 0:
        raise ValueError("need at least one pair")
    xs = np.array([np.asarray(p[0], dtype=np.float64).reshape(-1) for p in samples])
    ys = np.array([np.atleast_1d(np.asarray(p[1], dtype=np.float64)) for p in samples])
    return xs, ys


def nadaraya_watson(samples, x, theta: float, kernel: KernelSpec) -> np.ndarray:
    """sum_i y_i K_i / sum_i K_i; raises NoMassAtQuery when every K_i is zero."""
    xs, ys = _split(samples, kernel)
    w = _weights(xs, x, theta, kernel)
    total = w.sum()
    if total == 0:
        raise NoMassAtQuery("no sample falls inside the kernel window at the query point")
    return (w @ ys) / total


def empirical_objective(samples, x, theta: float, kernel: KernelSpec, z) -> float:
    """(1 / (2 N theta^r)) sum_i K_i ||z - y_i||^2."""
    xs, ys = _split(samples, kernel)
    w = _weights(xs, x, theta, kernel)
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    sq = np.sum((z - ys) ** 2, axis=-1)
    return float(w @ sq / (2 * len(ys)) * theta ** (-kernel.dim))


def empirical_gradient(samples, x, theta: float, kernel: KernelSpec, z) -> np.ndarray:
    """Gradient in z of the empirical objective."""
    xs, ys = _split(samples, kernel)
    w = _weights(xs, x, theta, kernel)
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    return (w @ (z - ys)) / len(ys) * theta ** (-kernel.dim)


# ---------------------------------------------------------------------------
# quadrature oracles for scalar outputs and one-dimensional inputs


def _require_scalar(s):
    if s.dim != 1 or s.m != 1:
        raise DimensionError("quadrature objectives support r = m = 1")


def _y_moments(s, t, xbar, z):
    """(int g dy, int y g dy, int (z - y)^2 g dy) at input xbar."""
    mean = float(s.regression_truth(t, xbar)[..., 0].reshape(-1)[0])
    lo, hi = mean - s.noise, mean + s.noise

    def g(y):
        return float(s.joint_density(t, np.array([xbar]), np.array([y]))[0])

    m0 = _quad(g, lo, hi, [mean])
    m1 = _quad(lambda y: y * g(y), lo, hi, [mean])
    m2 = _quad(lambda y: (z - y) ** 2 * g(y), lo, hi, [mean])
    return m0, m1, m2


def objective(s, t: int, x: float, z: float) -> float:
    """Phi^t(x, z) = 1/2 int (z - y)^2 g^t(x, y) dy by quadrature."""
    _require_scalar(s)
    return 0.5 * _y_moments(s, t, float(x), float(z))[2]


def objective_minimizer(s, t: int, x: float) -> float:
    """argmin over z of the quadrature objective, a ratio of y-moments."""
    _require_scalar(s)
    m0, m1, _ = _y_moments(s, t, float(x), 0.0)
    return m1 / m0


def mollified_objective(s, t: int, x: float, z: float, theta: float, kernel: KernelSpec) -> float:
    """Phi_theta^t(x, z) = 1/2 int K(u) int (z - y)^2 g^t(x + theta u, y) dy du."""
    _require_scalar(s)
    if not theta > 0:
        raise ValueError("window theta must be positive")
    lo, hi = kernel.support_box()
    def outer(u):
        return float(kernel.profile(u)) * _y_moments(s, t, x + theta * u, float(z))[2]

    marks = [-kernel.half_width, kernel.half_width] if kernel.compact else [0.0]
    return 0.5 * _quad(outer, lo, hi, marks)


def gradient_oracle(s, t: int, x: float, z: float, theta: float, kernel: KernelSpec) -> float:
    """d/dz Phi_theta = int K(u) int (z - y) g(x + theta u, y) dy du."""
    _require_scalar(s)
    lo, hi = kernel.support_box()

    def outer(u):
        m0, m1, _ = _y_moments(s, t, x + theta * u, 0.0)
        return float(kernel.profile(u)) * (z * m0 - m1)

    marks = [-kernel.half_width, kernel.half_width] if kernel.compact else [0.0]
    return _quad(outer, lo, hi, marks)
