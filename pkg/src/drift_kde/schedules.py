"""Adjustment (step) and window sequences, plus the optimal exponent laws.

A rule ``Rule(scale, exponent)`` produces ``scale / (1 + t) ** exponent``; an
exponent of zero is the constant rule. Text syntax used by configs and the
CLI is ``const:0.1`` or ``pow:1.0,0.5``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class Rule:
    scale: float
    exponent: float = 0.0

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"rule scale must be positive and finite, got {self.scale}")
        if not self.exponent >= 0:
            raise ValueError(f"rule exponent must be nonnegative, got {self.exponent}")

    @property
    def is_constant(self) -> bool:
        return self.exponent == 0

    def at(self, t: int) -> float:
        if t < 0:
            raise ValueError("step index must be nonnegative")
        if self.exponent == 0:
            return float(self.scale)
        return self.scale / (1.0 + t) ** self.exponent

    def values(self, t0: int, n: int) -> np.ndarray:
        if self.exponent == 0:
            return np.full(n, float(self.scale))
        t = np.arange(t0, t0 + n, dtype=np.float64)
        return self.scale / (1.0 + t) ** self.exponent

    def __str__(self) -> str:
        if self.exponent == 0:
            return f"const:{self.scale!r}"
        return f"pow:{self.scale!r},{self.exponent!r}"


def constant(value: float) -> Rule:
    return Rule(value, 0.0)


def power(scale: float, exponent: float) -> Rule:
    return Rule(scale, exponent)


def parse_rule(text: str) -> Rule:
    kind, _, args = text.strip().partition(":")
    kind = kind.strip().lower()
    try:
        nums = [float(a) for a in args.split(",")] if args.strip() else []
    except ValueError:
        raise ValueError(f"cannot parse schedule rule {text!r}") from None
    if kind == "const" and len(nums) == 1:
        return constant(nums[0])
    if kind == "pow" and len(nums) == 2:
        return power(nums[0], nums[1])
    raise ValueError(f"cannot parse schedule rule {text!r}; expected const:<v> or pow:<scale>,<exponent>")


@dataclass(frozen=True)
class ScheduleSpec:
    """Pair of rules for rho_t (step) and theta_t (window)."""

    rho: Rule
    theta: Rule

    def __post_init__(self):
        if self.rho.exponent > 1:
            raise ValueError(f"step exponent p must satisfy 0 <= p <= 1, got {self.rho.exponent}")

    def rho_at(self, t: int) -> float:
        return self.rho.at(t)

    def theta_at(self, t: int) -> float:
        return self.theta.at(t)

    def rho_values(self, t0: int, n: int) -> np.ndarray:
        return self.rho.values(t0, n)

    def theta_values(self, t0: int, n: int) -> np.ndarray:
        return self.theta.values(t0, n)

    def describe(self) -> dict:
        return {"rho": str(self.rho), "theta": str(self.theta)}


def rho_at(s, t: int) -> float:
    return s.rho_at(t)


def theta_at(s, t: int) -> float:
    return s.theta_at(t)


@dataclass(frozen=True)
class DriftAdaptiveSchedule:
    """rho_t = max(delta_t^alpha, floor_rho_t), theta_t = max(delta_t^(beta/r), floor_theta_t).

    ``deltas`` is either a callable ``t -> delta_t`` or a sequence indexed by t
    (the last entry is reused past its end).
    """

    deltas: Callable[[int], float] | Sequence[float]
    alpha: float
    beta: float
    dim: int
    rho_floor: Rule
    theta_floor: Rule

    def __post_init__(self):
        if not 0 < self.beta < self.alpha < 1:
            raise ValueError("need 0 < beta < alpha < 1")

    def _delta(self, t: int) -> float:
        if callable(self.deltas):
            return float(self.deltas(t))
        seq = self.deltas
        return float(seq[min(t, len(seq) - 1)])

    def rho_at(self, t: int) -> float:
        return max(self._delta(t) ** self.alpha, self.rho_floor.at(t))

    def theta_at(self, t: int) -> float:
        return max(self._delta(t) ** (self.beta / self.dim), self.theta_floor.at(t))

    def rho_values(self, t0: int, n: int) -> np.ndarray:
        return np.array([self.rho_at(t) for t in range(t0, t0 + n)])

    def theta_values(self, t0: int, n: int) -> np.ndarray:
        return np.array([self.theta_at(t) for t in range(t0, t0 + n)])

    def describe(self) -> dict:
        return {
            "schedule": "drift-adaptive",
            "alpha": repr(self.alpha),
            "beta": repr(self.beta),
            "rho_floor": str(self.rho_floor),
            "theta_floor": str(self.theta_floor),
        }


def _exact(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    # decimal reading keeps 0.1 as 1/10 rather than its binary expansion
    return Fraction(repr(float(value)))


def _check_r_nu(r, nu):
    if int(r) != r or r < 1:
        raise ValueError(f"dimension must be a positive integer, got {r}")
    if not 0 < nu <= 1:
        raise ValueError(f"Hoelder exponent must lie in (0, 1], got {nu}")


def optimal_drift_exponents(r: int, nu: float, exact: bool = False):
    """(alpha*, beta*) for rho = delta^alpha, theta = delta^beta under drift delta."""
    _check_r_nu(r, nu)
    r, nu = _exact(r), _exact(nu)
    alpha = (2 * r + nu) / (2 * (r + nu))
    beta = 1 / (2 * (r + nu))
    if exact:
        return alpha, beta
    return float(alpha), float(beta)


def optimal_stationary_exponents(r: int, nu: float, exact: bool = False):
    """(p*, q*, gamma*) for rho_t = rho/(1+t)^p, theta_t = theta/(1+t)^q."""
    _check_r_nu(r, nu)
    r, nu = _exact(r), _exact(nu)
    p = Fraction(1)
    q = 1 / (r + nu)
    gamma = nu / (r + nu)
    if exact:
        return p, q, gamma
    return float(p), float(q), float(gamma)


def theorem5_gamma(p: float, q: float, r: int, nu: float) -> float:
    """Rate exponent min(nu q, p, p - r q) for power-law schedules."""
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if q < 0:
        raise ValueError(f"q must be nonnegative, got {q}")
    p_, q_, r_, nu_ = (_exact(v) for v in (p, q, r, nu))
    return float(min(nu_ * q_, p_, p_ - r_ * q_))


def drift_schedule(delta: float, r: int, nu: float) -> ScheduleSpec:
    """Constant schedule rho = delta^alpha*, theta = delta^beta*."""
    if not delta > 0:
        raise ValueError("drift bound must be positive")
    alpha, beta = optimal_drift_exponents(r, nu)
    return ScheduleSpec(constant(delta**alpha), constant(delta**beta))


def stationary_schedule(r: int, nu: float, rho: float = 1.0, theta: float = 1.0) -> ScheduleSpec:
    """Power schedule with the optimal stationary exponents (p*, q*)."""
    p, q, _ = optimal_stationary_exponents(r, nu)
    return ScheduleSpec(power(rho, p), power(theta, q))
