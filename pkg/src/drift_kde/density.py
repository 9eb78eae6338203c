"""Point-wise recursive density tracking by projected stochastic quasi-gradients.

One step at query point x with samples xbar_1..xbar_N:

    xi      = z - (1 / (N theta^r)) sum_i K((xbar_i - x) / theta)
    z_next  = clamp(z - rho xi, lower, upper)

The Cesaro estimate is the rho-weighted mean of the iterates produced so far.
Batch Parzen estimates and the mollified density (kernel convolved with the
true density, evaluated by adaptive quadrature) serve as baselines and
oracles.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy import integrate

from .kernels import DimensionError, KernelSpec, as_points
from .schedules import ScheduleSpec, parse_rule

QUAD_TOL = 1e-8


class QuadratureError(ArithmeticError):
    pass


class LargeStepWarning(UserWarning):
    pass


@dataclass(frozen=True)
class DensityBounds:
    """Box [lower, upper] for the estimate at one point; ``cap`` bounds ``upper`` over all points."""

    lower: float = 0.0
    upper: float = 1.0
    cap: float | None = None

    def __post_init__(self):
        cap = self.upper if self.cap is None else self.cap
        object.__setattr__(self, "cap", float(cap))
        if not 0.0 <= self.lower <= self.upper <= self.cap:
            raise ValueError(f"need 0 <= lower <= upper <= cap, got {self.lower}, {self.upper}, {self.cap}")

    @classmethod
    def unconstrained(cls) -> "DensityBounds":
        return cls(0.0, math.inf, math.inf)


def window_mean(k: KernelSpec, batch: np.ndarray, x: np.ndarray, theta) -> np.ndarray:
    """(1 / (N theta^r)) sum_i K((xbar_i - x) / theta).

    ``batch`` has shape (..., N, r), ``x`` shape (Q, r) and ``theta`` broadcasts
    against the leading axes; the result has shape (..., Q). Summation runs
    sample by sample so the rounding does not depend on array layout.
    """
    theta = np.asarray(theta, dtype=np.float64)
    diff = batch[..., :, None, :] - x
    u = diff / theta[..., None, None, None]
    kv = k(u)
    acc = kv[..., 0, :].copy()
    for i in range(1, kv.shape[-2]):
        acc += kv[..., i, :]
    n = kv.shape[-2]
    return acc / n * theta[..., None] ** (-k.dim)


def sqg_update(z, rho, kmean, lower, upper):
    """Projected step shared by the single-state and ensemble code paths."""
    xi = z - kmean
    return np.minimum(np.maximum(z - rho * xi, lower), upper)


@dataclass(frozen=True)
class DensityTrackerState:
    x: tuple
    z: float
    t: int
    cesaro_num: float
    cesaro_den: float
    bounds: DensityBounds
    kernel: KernelSpec
    schedule: ScheduleSpec

    @classmethod
    def start(cls, x, kernel: KernelSpec, schedule, bounds: DensityBounds, z0: float | None = None):
        pt = as_points(x, kernel.dim).reshape(-1)
        if pt.size != kernel.dim:
            raise DimensionError("query point dimension does not match the kernel")
        if z0 is None:
            z0 = bounds.lower
        if not bounds.lower <= z0 <= bounds.upper:
            raise ValueError("initial estimate outside the bounds")
        return cls(tuple(float(v) for v in pt), float(z0), 0, 0.0, 0.0, bounds, kernel, schedule)

    @property
    def point(self) -> np.ndarray:
        return np.asarray(self.x, dtype=np.float64)

    def to_dict(self) -> dict:
        return {
            "x": list(self.x),
            "z": self.z,
            "t": self.t,
            "cesaro_num": self.cesaro_num,
            "cesaro_den": self.cesaro_den,
            "bounds": [self.bounds.lower, self.bounds.upper, self.bounds.cap],
            "kernel": [self.kernel.family, self.kernel.dim],
            "schedule": self.schedule.describe(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DensityTrackerState":
        sched = ScheduleSpec(parse_rule(d["schedule"]["rho"]), parse_rule(d["schedule"]["theta"]))
        return cls(
            tuple(d["x"]),
            float(d["z"]),
            int(d["t"]),
            float(d["cesaro_num"]),
            float(d["cesaro_den"]),
            DensityBounds(*d["bounds"]),
            KernelSpec(*d["kernel"]),
            sched,
        )


def _check_batch(batch, dim: int) -> np.ndarray:
    pts = np.asarray(batch, dtype=np.float64)
    if pts.size == 0:
        raise ValueError("batch must contain at least one sample")
    if dim == 1:
        pts = pts.reshape(-1, 1)
    else:
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[-1] != dim:
            raise DimensionError(f"samples must have dimension {dim}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("batch contains non-finite samples")
    return pts


def sqg_density_step(state: DensityTrackerState, batch) -> DensityTrackerState:
    pts = _check_batch(batch, state.kernel.dim)
    rho = state.schedule.rho_at(state.t)
    theta = state.schedule.theta_at(state.t)
    if rho > 1:
        warnings.warn(f"step rho_t = {rho} exceeds 1", LargeStepWarning, stacklevel=2)
    kmean = window_mean(state.kernel, pts, state.point[None, :], theta)[0]
    z = float(sqg_update(state.z, rho, kmean, state.bounds.lower, state.bounds.upper))
    return replace(
        state,
        z=z,
        t=state.t + 1,
        cesaro_num=state.cesaro_num + rho * z,
        cesaro_den=state.cesaro_den + rho,
    )


def cesaro_density(state: DensityTrackerState) -> float:
    if state.t < 1 or state.cesaro_den == 0:
        raise ValueError("Cesaro average needs at least one completed step")
    return state.cesaro_num / state.cesaro_den


def cesaro_from_history(rhos, zs):
    """Sum rho_j z_j / sum rho_j for scalar or vector iterates."""
    rhos = np.asarray(rhos, dtype=np.float64)
    zs = np.asarray(zs, dtype=np.float64)
    if rhos.size == 0:
        raise ValueError("Cesaro average needs at least one completed step")
    return np.tensordot(rhos, zs, axes=(0, 0)) / rhos.sum()


def parzen_estimate(samples, x, theta: float, kernel: KernelSpec) -> float:
    """(1 / (N theta^r)) sum_i K((xbar_i - x) / theta)."""
    if not theta > 0:
        raise ValueError("window theta must be positive")
    pts = _check_batch(samples, kernel.dim)
    q = as_points(x, kernel.dim).reshape(1, kernel.dim)
    # exactly rounded sum; the recursive form must match it to 1e-12
    kv = kernel((pts - q) / theta)
    return float(math.fsum(kv) / len(pts) * theta ** (-kernel.dim))


def _quad(f, lo, hi, points):
    pts = sorted({p for p in points if lo < p < hi})
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(
                f, lo, hi, points=pts or None, epsabs=QUAD_TOL / 10, epsrel=1e-10, limit=500
            )
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"adaptive quadrature did not converge: {exc}") from None
    if err > QUAD_TOL:
        raise QuadratureError(f"quadrature error estimate {err:.2e} exceeds {QUAD_TOL:.0e}")
    return val


def mollified_density(
    g,
    x,
    theta: float,
    kernel: KernelSpec,
    t: int = 0,
    breakpoints=(),
) -> float:
    """theta^-r integral K((xbar - x)/theta) g(xbar) dxbar, via u = (xbar - x)/theta.

    ``g`` is a density scenario (evaluated at time ``t``) or a callable taking
    an array of points. ``breakpoints`` lists 1-D locations where ``g`` is
    not smooth; scenarios supply their own.
    """
    if not theta > 0:
        raise ValueError("window theta must be positive")
    r = kernel.dim
    x = as_points(x, r).reshape(r)
    if hasattr(g, "density"):
        dens: Callable = lambda p: g.density(t, p)
        marks = [list(breakpoints) + _scenario_marks(g, t, j) for j in range(r)]
    else:
        dens = g
        marks = [list(breakpoints)] * r
    lo, hi = kernel.support_box()
    kink_u = [-kernel.half_width, kernel.half_width] if kernel.compact else [0.0]
    if r == 1:
        u_marks = kink_u + [(m - x[0]) / theta for m in marks[0]]

        def f(u):
            return float(kernel.profile(u)) * float(np.asarray(dens(np.array([x[0] + theta * u]))).reshape(-1)[0])

        return _quad(f, lo, hi, u_marks)
    if r == 2:
        def inner(u1):
            def f(u2):
                pt = np.array([x[0] + theta * u1, x[1] + theta * u2])
                return float(kernel.profile(u2)) * float(np.asarray(dens(pt[None, :])).reshape(-1)[0])

            return float(kernel.profile(u1)) * _quad(f, lo, hi, kink_u + [(m - x[1]) / theta for m in marks[1]])

        return _quad(inner, lo, hi, kink_u + [(m - x[0]) / theta for m in marks[0]])
    raise DimensionError("mollified density quadrature supports r <= 2")


def _scenario_marks(s, t, axis):
    marks = list(s.kinks()) if s.dim == 1 else []
    means = getattr(s, "means", None)
    if means is not None:
        shift = s.shift.at(np.asarray(t))
        marks.extend((means + shift)[:, axis].tolist())
    return marks
