"""Error-bound evaluators and verifiers for recursive number sequences.

The evaluators are direct formula transcriptions used as oracles against
Monte Carlo runs; nothing here is fitted. The verifiers simulate the
equality case of each recursion (the worst case the hypothesis allows) and
report the first step at which a claimed bound fails, if any.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class DensityBoundInputs:
    gbar: float
    kbar: float
    A: float
    H: float
    nu: float
    r: int
    delta: float
    rho: float
    theta: float
    t: int = 0
    v0: float = 0.0

    def __post_init__(self):
        for name in ("gbar", "kbar", "A", "H", "delta", "v0"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")
        if not 0 < self.nu <= 1:
            raise ValueError("nu must lie in (0, 1]")
        if not (self.rho > 0 and self.theta > 0):
            raise ValueError("rho and theta must be positive")


def _stationary_terms(b: DensityBoundInputs) -> float:
    """2 gbar A H theta^nu + gbar^2 rho + Kbar^2 rho theta^(-2r)."""
    return (
        2 * b.gbar * b.A * b.H * b.theta**b.nu
        + b.gbar**2 * b.rho
        + b.kbar**2 * b.rho * b.theta ** (-2 * b.r)
    )


def theorem1_bound(b: DensityBoundInputs) -> tuple[float, float]:
    """(deterministic part, variance cap) for constant rho and theta under drift delta."""
    if not 0 < b.rho <= 0.5:
        raise ValueError(f"need 0 < rho <= 1/2, got {b.rho}")
    det = 4 * b.gbar * b.delta / b.rho + _stationary_terms(b) + (1 - 2 * b.rho) ** b.t * b.v0
    var = 2 * b.rho * b.gbar**3 * (b.gbar + b.kbar * b.theta ** (-b.r))
    return det, var


def theorem5_bound(
    v0: float,
    rho: float,
    p: float,
    theta: float,
    q: float,
    r: int,
    nu: float,
    A: float,
    H: float,
    gbar: float,
    kbar: float,
    t,
):
    """Q / (1 + t)^gamma for rho_t = rho/(1+t)^p, theta_t = theta/(1+t)^q."""
    if not 0 < p <= 1:
        raise ValueError(f"need 0 < p <= 1, got {p}")
    if not 2 * rho > p:
        raise ValueError(f"need 2 rho > p, got rho={rho}, p={p}")
    C = max(
        4 * A * H * gbar * rho * theta**nu,
        2 * gbar**2 * rho**2,
        2 * kbar * gbar * rho**2 * theta ** (-r),
    )
    gamma = min(nu * q, p, p - r * q)
    Q = max(v0, C / (2 * rho - p))
    return Q / (1.0 + np.asarray(t, dtype=np.float64)) ** gamma


def theorem5_constants(v0, rho, p, theta, q, r, nu, A, H, gbar, kbar) -> dict:
    C = max(
        4 * A * H * gbar * rho * theta**nu,
        2 * gbar**2 * rho**2,
        2 * kbar * gbar * rho**2 * theta ** (-r),
    )
    return {"C": C, "gamma": min(nu * q, p, p - r * q), "Q": max(v0, C / (2 * rho - p))}


def cesaro_bound(b: DensityBoundInputs, k: float) -> tuple[float, float, float]:
    """(initial, deterministic, variance cap) of the Cesaro estimate at t + 1 = k / rho."""
    if not k > 0:
        raise ValueError("k must be positive")
    initial = b.v0 / (2 * k)
    det = _stationary_terms(b)
    var = b.gbar**3 / k * (b.gbar + b.kbar**2 * b.theta ** (-b.r))
    return initial, det, var


def sqg_table_row(b: DensityBoundInputs, k: float) -> tuple[float, float, float]:
    """Matching (initial, deterministic, variance cap) for the plain iterate at t = k / rho."""
    initial = math.exp(-2 * k) * b.v0
    var = 2 * b.rho * b.gbar**3 * (b.gbar + b.kbar * b.theta ** (-b.r))
    return initial, _stationary_terms(b), var


@dataclass(frozen=True)
class RegressionBoundInputs:
    g1_lower: float
    g1_bar: float
    y_norm: float
    y_norm_x: float
    A: float
    B: float
    C: float
    kbar: float
    nu: float
    r: int
    n_min: int = 1
    g3_bar: float = 0.0


def theorem7_Q(c: RegressionBoundInputs) -> float:
    y = c.y_norm
    return max(
        6 * y,
        4 * y * c.g1_bar,
        4 * c.A * (c.B * y**2 + c.C),
        2 * c.kbar**2 * (y**2 + c.y_norm_x**2),
    )


def theorem7_bound(c: RegressionBoundInputs, delta: float, rho: float, theta: float, v0: float, t: int):
    """(deterministic, variance cap) for regression tracking with constant rho and theta."""
    if not c.g1_lower > 0:
        raise ValueError("lower input density bound must be positive")
    if not 0 < rho <= 1 / c.g1_bar:
        raise ValueError(f"need 0 < rho <= 1/g1_bar = {1 / c.g1_bar}, got {rho}")
    if c.n_min < 1:
        raise ValueError("batch sizes must be positive")
    Q = theorem7_Q(c)
    det = (1 - c.g1_lower * rho) ** t * v0 + Q / c.g1_lower * (
        delta / rho + delta + theta**c.nu + rho * theta ** (-2 * c.r)
    )
    y2 = c.y_norm**2
    var = rho * theta ** (-c.r) * 16 * c.kbar * y2 * (y2 * c.g1_bar + c.g3_bar) / (c.g1_lower * c.n_min)
    return det, var


# ---------------------------------------------------------------------------
# recursive sequences


@dataclass
class LemmaResult:
    passed: bool
    values: np.ndarray
    bounds: np.ndarray
    first_violation: int | None = None
    info: dict = field(default_factory=dict)


def _first_violation(values, bounds, tol):
    bad = np.nonzero(values > bounds + tol)[0]
    return int(bad[0]) if bad.size else None


def lemma_a1_verify(v0: float, q: float, rhos, alphas, alpha_cap: float, etas, tol: float = 1e-12) -> LemmaResult:
    """v_{t+1} = (1 - q rho_t) v_t + rho_t alpha_t + rho_t eta_t against

    v_t <= v0 prod_{i<t}(1 - q rho_i) + alpha/q + sum_{i<t} eta_i rho_i prod_{i<j<t}(1 - q rho_j).
    """
    rhos = np.asarray(rhos, dtype=np.float64)
    alphas = np.asarray(alphas, dtype=np.float64)
    etas = np.asarray(etas, dtype=np.float64)
    if not q > 0:
        raise ValueError("q must be positive")
    if np.any(q * rhos > 1) or np.any(rhos < 0):
        raise ValueError("need 0 <= q rho_t <= 1")
    if np.any(alphas < 0) or np.any(alphas > alpha_cap):
        raise ValueError("alpha_t must lie in [0, alpha]")
    T = rhos.size
    v = np.empty(T + 1)
    bound = np.empty(T + 1)
    v[0] = bound[0] = v0
    decay = 1.0
    noise = 0.0
    for t in range(T):
        f = 1 - q * rhos[t]
        v[t + 1] = f * v[t] + rhos[t] * alphas[t] + rhos[t] * etas[t]
        decay *= f
        noise = noise * f + etas[t] * rhos[t]
        bound[t + 1] = v0 * decay + alpha_cap / q + noise
    bound[0] = v0 + alpha_cap / q
    scale = tol * (1 + np.abs(bound))
    first = _first_violation(v, bound, scale)
    return LemmaResult(first is None, v, bound, first)


def lemma_a2_verify(rhos, alphas, v0: float) -> LemmaResult:
    """v_{t+1} = (1 - rho_t) v_t + rho_t alpha_t; checks v_T <= eps with

    eps = sup_{i >= T/2} alpha_i + max(v0, sup alpha) prod_{T/2 <= i < T}(1 - rho_i).
    """
    rhos = np.asarray(rhos, dtype=np.float64)
    alphas = np.asarray(alphas, dtype=np.float64)
    if np.any(rhos <= 0) or np.any(rhos > 1):
        raise ValueError("need 0 < rho_t <= 1")
    if np.any(alphas < 0):
        raise ValueError("alpha_t must be nonnegative")
    T = rhos.size
    v = np.empty(T + 1)
    v[0] = v0
    for t in range(T):
        v[t + 1] = (1 - rhos[t]) * v[t] + rhos[t] * alphas[t]
    half = T // 2
    eps = float(np.max(alphas[half:])) + max(v0, float(np.max(alphas))) * float(np.prod(1 - rhos[half:]))
    passed = bool(v[T] <= eps * (1 + 1e-12) + 1e-300)
    return LemmaResult(passed, v, np.full(T + 1, eps), None if passed else T, {"eps": eps, "v_T": float(v[T])})


def lemma_a3_verify(v0: float, rho: float, beta: float, gamma: float, C: float, T: int, tol: float = 1e-12) -> LemmaResult:
    """v_{t+1} = (1 - rho/(1+t)^beta) v_t + C/(1+t)^(beta+gamma) against Q/(1+t)^gamma."""
    if not 0 < beta <= 1:
        raise ValueError("need 0 < beta <= 1")
    if not 0 < gamma < rho:
        raise ValueError("need 0 < gamma < rho")
    if not rho > beta:
        raise ValueError("need rho > beta for a finite Q")
    if not C > 0:
        raise ValueError("need C > 0")
    Q = max(v0, C / (rho - beta))
    t = np.arange(T + 1, dtype=np.float64)
    v = np.empty(T + 1)
    v[0] = v0
    for i in range(T):
        v[i + 1] = (1 - rho / (1 + i) ** beta) * v[i] + C / (1 + i) ** (beta + gamma)
    bound = Q / (1 + t) ** gamma
    first = _first_violation(v, bound, tol * (1 + bound))
    return LemmaResult(first is None, v, bound, first, {"Q": Q})


@dataclass
class ConditionsReport:
    sum_rho: np.ndarray
    sum_gamma: np.ndarray
    terminal_v: float
    recursion_holds: bool
    rho_vanishes: bool
    rho_sum_diverges: bool
    gamma_sum_converges: bool
    flags: list

    @property
    def ok(self) -> bool:
        return not self.flags


def _doubling_increment(partial):
    T = partial.size
    return float(partial[-1] - partial[T // 2 - 1]) if T >= 2 else 0.0


def lemma_a4_conditions_check(v, rho, w, gamma, tol: float = 1e-9) -> ConditionsReport:
    """Numerical diagnostics for the stochastic Lyapunov conditions on a realized trace.

    ``v`` has length T + 1, the others length T. Conditions on limits and sums
    are judged on the second half of the trace:

    * recursion: v_{t+1} <= v_t - rho_t w_t + gamma_t at every t,
    * vanishing steps: rho at the end at most 1% of the largest rho,
    * divergent step sum: the last doubling adds at least 1% of the total,
    * convergent gamma sum: the last doubling adds at most 10% of 1 + sum |gamma|.
    """
    v = np.asarray(v, dtype=np.float64)
    rho = np.asarray(rho, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    T = rho.size
    if v.size != T + 1 or w.size != T or gamma.size != T or T < 2:
        raise ValueError("trace must hold T + 1 values of v and T values of rho, w, gamma (T >= 2)")
    if np.any(v < 0) or np.any(rho < 0) or not np.all(np.isfinite(v)):
        raise ValueError("v and rho must be finite and nonnegative")
    rhs = v[:-1] - rho * w + gamma
    recursion = bool(np.all(v[1:] <= rhs + tol * (1 + np.abs(rhs))))
    s_rho = np.cumsum(rho)
    s_gamma = np.cumsum(gamma)
    vanish = bool(rho[-1] <= 0.01 * rho.max())
    diverge = bool(_doubling_increment(s_rho) >= 0.01 * s_rho[-1])
    tail = abs(_doubling_increment(s_gamma))
    converge = bool(tail <= 0.1 * (1 + float(np.sum(np.abs(gamma)))))
    flags = []
    if not recursion:
        flags.append("recursion (i) violated")
    if not vanish:
        flags.append("(ii) rho_t does not tend to zero")
    if not diverge:
        flags.append("(ii) sum of rho_t appears to converge")
    if not converge:
        flags.append("(iii) sum of gamma_t does not settle")
    return ConditionsReport(s_rho, s_gamma, float(v[-1]), recursion, vanish, diverge, converge, flags)


# ---------------------------------------------------------------------------
# randomized instance generators


def random_a1_instance(u: np.ndarray, T: int):
    """Map uniforms of shape (4 + 3T,) to an admissible instance for lemma_a1_verify."""
    q = 0.1 + 3.0 * u[0]
    alpha = 2.0 * u[1]
    v0 = 5.0 * u[2]
    rhos = u[4 : 4 + T] / q
    alphas = alpha * u[4 + T : 4 + 2 * T]
    etas = (2.0 * u[4 + 2 * T : 4 + 3 * T] - 1.0) * (1 + 4 * u[3])
    return v0, q, rhos, alphas, alpha, etas


def random_a3_instance(u: np.ndarray):
    """Map five uniforms to (v0, rho, beta, gamma, C) with 0 < gamma < rho, rho > beta."""
    beta = 0.05 + 0.95 * u[0]
    rho = beta + 0.05 + 2.0 * u[1]
    gamma = max(1e-3, 0.99 * rho * u[2])
    C = math.exp(-3.0 + 6.0 * u[3])
    v0 = 5.0 * u[4]
    return v0, rho, beta, gamma, C


# ---------------------------------------------------------------------------
# the verification suite behind the verify-lemmas command


@dataclass
class SuiteRow:
    name: str
    passed: bool
    detail: str


def run_lemma_suite(seed: int = 0, n_random: int = 500, a3_steps: int = 10_000) -> list[SuiteRow]:
    from .experiments import instrumented_density_run
    from .density import DensityBounds
    from .kernels import kernel
    from .rng import stream, uniforms
    from .scenarios import drifting_normal
    from .schedules import ScheduleSpec, constant, stationary_schedule

    rows = []
    # A1: equality case, then randomized admissible instances
    r = lemma_a1_verify(1.0, 2.0, [0.25] * 3, [0.1] * 3, 0.1, [0.0] * 3)
    rows.append(SuiteRow("A1 equality case", r.passed, f"v_3={float(r.values[3])!r} bound={float(r.bounds[3])!r}"))
    T1 = 200
    fails = []
    state = stream(seed, 1)
    for i in range(n_random):
        u, state = uniforms(state, 4 + 3 * T1)
        res = lemma_a1_verify(*random_a1_instance(u, T1))
        if not res.passed:
            fails.append(i)
    rows.append(SuiteRow(f"A1 randomized x{n_random}", not fails, f"failures={len(fails)}"))

    # A2: the three documented sequences, then randomized vanishing alphas
    t = np.arange(100_000, dtype=np.float64)
    r = lemma_a2_verify(1 / (1 + t), 1 / (1 + t), 1.0)
    rows.append(SuiteRow("A2 rho=alpha=1/(1+t)", r.passed and r.info["v_T"] < 0.01, f"v_T={r.info['v_T']!r}"))
    r = lemma_a2_verify(1 / (1 + t[:1000]), np.zeros(1000), 1.0)
    rows.append(SuiteRow("A2 alpha=0", r.passed, f"v_T={r.info['v_T']!r}"))
    t60 = np.arange(60, dtype=np.float64)
    r = lemma_a2_verify(np.full(60, 0.5), 2.0**-t60, 1.0)
    rows.append(SuiteRow("A2 rho=0.5, alpha=2^-t", r.passed and r.info["v_T"] < 1e-6, f"v_T={r.info['v_T']!r}"))
    T2 = 2000
    fails = []
    state = stream(seed, 2)
    ts = np.arange(T2, dtype=np.float64)
    for i in range(n_random):
        u, state = uniforms(state, 4 + T2)
        p = 0.3 + 0.7 * u[0]
        rhos = np.minimum(1.0, (0.2 + u[1]) / (1 + ts) ** p)
        alphas = (1 + 4 * u[2]) * u[4:] / (1 + ts) ** (0.1 + u[3])
        res = lemma_a2_verify(rhos, alphas, 5.0 * u[3])
        if not res.passed:
            fails.append(i)
    rows.append(SuiteRow(f"A2 randomized x{n_random}", not fails, f"failures={len(fails)}"))

    # A3: equality case, then randomized admissible instances
    r = lemma_a3_verify(1.0, 2.0, 1.0, 0.5, 1.0, 3)
    rows.append(SuiteRow("A3 equality case", r.passed, f"Q={r.info['Q']!r}"))
    fails = []
    first = None
    state = stream(seed, 3)
    for i in range(n_random):
        u, state = uniforms(state, 5)
        inst = random_a3_instance(u)
        res = lemma_a3_verify(*inst, a3_steps)
        if not res.passed:
            fails.append(i)
            if first is None:
                first = (inst, res.first_violation)
    detail = f"failures={len(fails)}"
    if first is not None:
        (v0, rho, beta, gamma, C), tv = first
        detail += f" first=(v0={v0:.4g}, rho={rho:.4g}, beta={beta:.4g}, gamma={gamma:.4g}, C={C:.4g}) at t={tv}"
    rows.append(SuiteRow(f"A3 randomized x{n_random}", not fails, detail))

    # A4: constant steps must be flagged; an optimal stationary run must not be
    sc = drifting_normal(0.0)
    k = kernel("gaussian")
    bounds = DensityBounds(0.0, 1.0)
    const = instrumented_density_run(sc, k, ScheduleSpec(constant(0.1), constant(0.5)), bounds, 0.0, 4000, seed)
    rep = lemma_a4_conditions_check(const.v, const.rho, const.w, const.gamma)
    rows.append(SuiteRow("A4 constant rho flagged", not rep.rho_vanishes, "; ".join(rep.flags) or "no flags"))
    stat = instrumented_density_run(sc, k, stationary_schedule(1, 1.0), bounds, 0.0, 10_000, seed)
    rep = lemma_a4_conditions_check(stat.v, stat.rho, stat.w, stat.gamma)
    rows.append(SuiteRow(
        "A4 stationary run conditions",
        rep.ok,
        f"sum_rho={float(rep.sum_rho[-1])!r} sum_gamma={float(rep.sum_gamma[-1])!r} v_T={rep.terminal_v!r}",
    ))
    return rows
