"""Replica ensembles of the trackers, vectorised over replicas and query points.

Replica ``i`` draws from the stream keyed ``base_seed ^ i``. The recursion is
evaluated with the same elementwise operations as the single-state step
functions, so every replica's trajectory is independent of how replicas are
grouped into chunks or spread over worker processes. Chunks have a fixed
size and results are concatenated in replica order.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .density import DensityBounds, sqg_update, window_mean
from .grid import GridSpec, project_onto_G, weighted_ise
from .kernels import KernelSpec, as_points
from .regression import RegressionConstraint, project_Y, regression_xi
from .rng import stream

TIME_BLOCK = 2048
REPLICA_CHUNK = 25
FULL_TRACE_LIMIT = 10_000


def checkpoints(T: int, full: bool | None = None) -> np.ndarray:
    """Steps at which estimates are recorded: every t when T <= 1e4, else ceil(1.2^k) and T."""
    if T < 1:
        raise ValueError("need at least one step")
    if full is None:
        full = T <= FULL_TRACE_LIMIT
    if full:
        return np.arange(1, T + 1)
    pts = set()
    k = 0
    while True:
        t = math.ceil(1.2**k)
        if t > T:
            break
        pts.add(t)
        k += 1
    pts.add(T)
    return np.array(sorted(pts), dtype=np.int64)


def _chunks(R: int, size: int = REPLICA_CHUNK):
    return [(lo, min(R, lo + size)) for lo in range(0, R, size)]


def _map_chunks(fn, spec, R: int, workers: int):
    parts = _chunks(R)
    if workers <= 1 or len(parts) == 1:
        results = [fn(spec, lo, hi) for lo, hi in parts]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, [spec] * len(parts), *zip(*parts)))
    return results


# ---------------------------------------------------------------------------
# density


@dataclass(frozen=True)
class DensityEnsemble:
    scenario: object
    kernel: KernelSpec
    schedule: object
    bounds: DensityBounds
    queries: np.ndarray
    steps: int
    replicas: int
    seed: int
    batch: int = 1
    z0: float | None = None
    record: np.ndarray | None = None


@dataclass
class DensityRecord:
    t: np.ndarray
    queries: np.ndarray
    z: np.ndarray
    cesaro: np.ndarray
    truth: np.ndarray

    @property
    def sq_error(self) -> np.ndarray:
        return (self.z - self.truth) ** 2

    def mse(self) -> tuple[np.ndarray, np.ndarray]:
        """Replica-mean squared error and its standard error, shape (C, Q)."""
        return mean_and_stderr(self.sq_error)


def mean_and_stderr(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    R = values.shape[0]
    mean = values.mean(axis=0)
    if R < 2:
        return mean, np.full_like(mean, np.nan)
    return mean, values.std(axis=0, ddof=1) / math.sqrt(R)


def _density_chunk(spec: DensityEnsemble, lo: int, hi: int):
    sc, k = spec.scenario, spec.kernel
    q = as_points(spec.queries, k.dim).reshape(-1, k.dim)
    Rc, Q, N = hi - lo, q.shape[0], spec.batch
    record = spec.record if spec.record is not None else checkpoints(spec.steps)
    rec_set = {int(t): i for i, t in enumerate(record)}
    z = np.full((Rc, Q), spec.bounds.lower if spec.z0 is None else spec.z0, dtype=np.float64)
    cnum = np.zeros((Rc, Q))
    cden = 0.0
    out_z = np.empty((Rc, len(record), Q))
    out_c = np.empty((Rc, len(record), Q))
    states = [stream(spec.seed, i) for i in range(lo, hi)]
    lower, upper = spec.bounds.lower, spec.bounds.upper
    for t0 in range(0, spec.steps, TIME_BLOCK):
        n = min(TIME_BLOCK, spec.steps - t0)
        rho = spec.schedule.rho_values(t0, n)
        theta = spec.schedule.theta_values(t0, n)
        draws = np.empty((Rc, n, N, k.dim))
        for j in range(Rc):
            pts, states[j] = _sample_batches(sc, t0, n, N, states[j])
            draws[j] = pts
        kmean = window_mean(k, draws, q, theta[None, :])
        for j in range(n):
            z = sqg_update(z, rho[j], kmean[:, j, :], lower, upper)
            cnum = cnum + rho[j] * z
            cden = cden + rho[j]
            slot = rec_set.get(t0 + j + 1)
            if slot is not None:
                out_z[:, slot] = z
                out_c[:, slot] = cnum / cden
    return out_z, out_c


def _batch_times(t0: int, n: int, N: int) -> np.ndarray:
    """Each of the n steps draws N samples, all from the density at that step."""
    return np.repeat(np.arange(t0, t0 + n), N)


def _sample_batches(sc, t0: int, n: int, N: int, state):
    pts, state = sc.sample_times(_batch_times(t0, n, N), state)
    return pts.reshape(n, N, sc.dim), state


def run_density(spec: DensityEnsemble, workers: int = 1) -> DensityRecord:
    parts = _map_chunks(_density_chunk, spec, spec.replicas, workers)
    z = np.concatenate([p[0] for p in parts], axis=0)
    c = np.concatenate([p[1] for p in parts], axis=0)
    record = spec.record if spec.record is not None else checkpoints(spec.steps)
    q = as_points(spec.queries, spec.kernel.dim).reshape(-1, spec.kernel.dim)
    truth = spec.scenario.density(record[:, None], q[None, :, :])
    return DensityRecord(record, q, z, c, truth)


# ---------------------------------------------------------------------------
# regression


@dataclass(frozen=True)
class RegressionEnsemble:
    scenario: object
    kernel: KernelSpec
    schedule: object
    constraint: RegressionConstraint
    queries: np.ndarray
    steps: int
    replicas: int
    seed: int
    batch: int = 1
    record: np.ndarray | None = None


@dataclass
class RegressionRecord:
    t: np.ndarray
    queries: np.ndarray
    z: np.ndarray
    cesaro: np.ndarray
    truth: np.ndarray

    @property
    def sq_error(self) -> np.ndarray:
        d = self.z - self.truth
        return np.sum(d * d, axis=-1)

    def mse(self):
        return mean_and_stderr(self.sq_error)


def _regression_chunk(spec: RegressionEnsemble, lo: int, hi: int):
    sc, k, c = spec.scenario, spec.kernel, spec.constraint
    q = as_points(spec.queries, k.dim).reshape(-1, k.dim)
    Rc, Q, N, m = hi - lo, q.shape[0], spec.batch, c.dim
    record = spec.record if spec.record is not None else checkpoints(spec.steps)
    rec_set = {int(t): i for i, t in enumerate(record)}
    z = np.broadcast_to(project_Y(np.zeros(m), c), (Rc, Q, m)).copy()
    cnum = np.zeros((Rc, Q, m))
    cden = 0.0
    out_z = np.empty((Rc, len(record), Q, m))
    out_c = np.empty((Rc, len(record), Q, m))
    states = [stream(spec.seed, i) for i in range(lo, hi)]
    for t0 in range(0, spec.steps, TIME_BLOCK):
        n = min(TIME_BLOCK, spec.steps - t0)
        rho = spec.schedule.rho_values(t0, n)
        theta = spec.schedule.theta_values(t0, n)
        xs = np.empty((Rc, n, N, k.dim))
        ys = np.empty((Rc, n, N, m))
        for j in range(Rc):
            x, y, states[j] = _sample_pairs(sc, t0, n, N, states[j])
            xs[j], ys[j] = x, y
        # kernel values (Rc, n, Q, N)
        u = (xs[:, :, None, :, :] - q[None, None, :, None, :]) / theta[None, :, None, None, None]
        kv = k(u)
        for j in range(n):
            xi = regression_xi(z, kv[:, j], ys[:, j, None, :, :], theta[j], k.dim)
            z = project_Y(z - rho[j] * xi, c)
            cnum = cnum + rho[j] * z
            cden = cden + rho[j]
            slot = rec_set.get(t0 + j + 1)
            if slot is not None:
                out_z[:, slot] = z
                out_c[:, slot] = cnum / cden
    return out_z, out_c


def _sample_pairs(sc, t0: int, n: int, N: int, state):
    x, y, state = sc.sample_times(_batch_times(t0, n, N), state)
    return x.reshape(n, N, sc.dim), y.reshape(n, N, sc.m), state


def run_regression(spec: RegressionEnsemble, workers: int = 1) -> RegressionRecord:
    parts = _map_chunks(_regression_chunk, spec, spec.replicas, workers)
    z = np.concatenate([p[0] for p in parts], axis=0)
    c = np.concatenate([p[1] for p in parts], axis=0)
    record = spec.record if spec.record is not None else checkpoints(spec.steps)
    q = as_points(spec.queries, spec.kernel.dim).reshape(-1, spec.kernel.dim)
    truth = spec.scenario.regression_truth(record[:, None], q[None, :, :])
    return RegressionRecord(record, q, z, c, truth)


# ---------------------------------------------------------------------------
# grid


@dataclass(frozen=True)
class GridEnsemble:
    scenario: object
    kernel: KernelSpec
    schedule: object
    grid: GridSpec
    lower: float
    upper: float
    normalized: bool
    steps: int
    replicas: int
    seed: int
    record: np.ndarray | None = None
    method: str = "breakpoints"


@dataclass
class GridRecord:
    t: np.ndarray
    values: np.ndarray
    truth: np.ndarray
    grid: GridSpec

    def ise(self) -> np.ndarray:
        return weighted_ise(self.values, self.truth[None], self.grid)


def _grid_start(spec: GridEnsemble) -> np.ndarray:
    g = spec.grid
    flat = np.full(g.size, 1.0 / float(np.sum(g.weights)))
    return project_onto_G(flat, g, spec.lower, spec.upper, spec.normalized, spec.method)


def _grid_chunk(spec: GridEnsemble, lo: int, hi: int):
    sc, k, g = spec.scenario, spec.kernel, spec.grid
    Rc = hi - lo
    record = spec.record if spec.record is not None else checkpoints(spec.steps)
    rec_set = {int(t): i for i, t in enumerate(record)}
    z = np.broadcast_to(_grid_start(spec), (Rc, g.size)).copy()
    out = np.empty((Rc, len(record) + 1, g.size))
    out[:, 0] = z
    states = [stream(spec.seed, i) for i in range(lo, hi)]
    for t0 in range(0, spec.steps, TIME_BLOCK):
        n = min(TIME_BLOCK, spec.steps - t0)
        rho = spec.schedule.rho_values(t0, n)
        theta = spec.schedule.theta_values(t0, n)
        draws = np.empty((Rc, n))
        for j in range(Rc):
            pts, states[j] = sc.sample_block(t0, n, states[j])
            draws[j] = pts[:, 0]
        for j in range(n):
            kv = k((draws[:, j, None] - g.points) / theta[j]) / theta[j]
            raw = z - rho[j] * (z - kv)
            z = project_onto_G(raw, g, spec.lower, spec.upper, spec.normalized, spec.method)
            slot = rec_set.get(t0 + j + 1)
            if slot is not None:
                out[:, slot + 1] = z
    return (out,)


def run_grid(spec: GridEnsemble, workers: int = 1) -> GridRecord:
    if spec.kernel.dim != 1:
        raise ValueError("grid tracking is one-dimensional")
    parts = _map_chunks(_grid_chunk, spec, spec.replicas, workers)
    vals = np.concatenate([p[0] for p in parts], axis=0)
    record = spec.record if spec.record is not None else checkpoints(spec.steps)
    t = np.concatenate([[0], record])
    truth = spec.scenario.density(t[:, None], spec.grid.points[None, :])
    return GridRecord(t, vals, truth, spec.grid)


# ---------------------------------------------------------------------------
# analysis


@dataclass(frozen=True)
class RateFit:
    slope: float
    stderr: float
    intercept: float
    n_points: int


def fit_rate(ts, mse, window=(None, None), min_points: int = 10) -> RateFit:
    """OLS of log(mse) on log(1 + t) over checkpoints with t_lo <= t <= t_hi."""
    ts = np.asarray(ts, dtype=np.float64)
    mse = np.asarray(mse, dtype=np.float64)
    lo = -np.inf if window[0] is None else window[0]
    hi = np.inf if window[1] is None else window[1]
    sel = (ts >= lo) & (ts <= hi)
    if np.count_nonzero(sel) < min_points:
        raise ValueError(f"need at least {min_points} checkpoints in the fit window")
    if np.any(mse[sel] <= 0) or not np.all(np.isfinite(mse[sel])):
        raise ValueError("MSE must be positive and finite inside the fit window")
    x = np.log1p(ts[sel])
    y = np.log(mse[sel])
    if np.ptp(y) == 0:
        return RateFit(0.0, 0.0, float(y[0]), int(sel.sum()))
    res = stats.linregress(x, y)
    return RateFit(float(res.slope), float(res.stderr), float(res.intercept), int(sel.sum()))


def loglog_slope(xs, ys) -> RateFit:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log-log fit needs positive values")
    res = stats.linregress(np.log(xs), np.log(ys))
    return RateFit(float(res.slope), float(res.stderr), float(res.intercept), xs.size)


@dataclass
class SweepRow:
    delta: float
    rho: float
    theta: float
    steady_mse: float
    stderr: float
    burn_in: int
    window: int
    extra: dict = field(default_factory=dict)


def steady_state(record, start: int) -> tuple[float, float]:
    """Window-averaged replica-mean squared error over recorded t > start."""
    sel = record.t > start
    per_replica = record.sq_error[:, sel].mean(axis=(1, 2))
    mean, se = mean_and_stderr(per_replica)
    return float(mean), float(se)


def drift_sweep(
    deltas,
    kernel: KernelSpec,
    bounds: DensityBounds,
    query,
    replicas: int,
    seed: int,
    amplitude: float = 1.0,
    workers: int = 1,
    burn_factor: float = 5.0,
) -> list[SweepRow]:
    """Oscillating-mean normal tracked with rho = delta^alpha*, theta = delta^beta*.

    Burn-in is ceil(burn_factor / rho) steps; the error is averaged over one
    full oscillation period that follows.
    """
    from .scenarios import drifting_normal
    from .schedules import drift_schedule

    rows = []
    for delta in deltas:
        sc = drifting_normal(delta, mode="oscillate", amplitude=amplitude)
        sched = drift_schedule(delta, kernel.dim, sc.holder_exponent)
        rho, theta = sched.rho_at(0), sched.theta_at(0)
        burn = math.ceil(burn_factor / rho)
        period = math.ceil(2 * math.pi / sc.shift.omega)
        steps = burn + period
        spec = DensityEnsemble(
            sc, kernel, sched, bounds, np.atleast_1d(query), steps, replicas, seed,
            record=np.arange(burn + 1, steps + 1),
        )
        rec = run_density(spec, workers)
        mse, se = steady_state(rec, burn)
        rows.append(SweepRow(float(delta), rho, theta, mse, se, burn, period, {"omega": sc.shift.omega}))
    return rows


@dataclass
class CesaroComparison:
    ks: np.ndarray
    t: np.ndarray
    var_sqg: np.ndarray
    var_cesaro: np.ndarray
    mse_sqg: np.ndarray
    mse_cesaro: np.ndarray

    def slopes(self) -> tuple[RateFit, RateFit]:
        return loglog_slope(self.ks, self.var_cesaro), loglog_slope(self.ks, self.var_sqg)


def cesaro_compare(
    scenario, kernel: KernelSpec, rho: float, theta: float, bounds: DensityBounds, query, ks,
    replicas: int, seed: int, workers: int = 1,
) -> CesaroComparison:
    """Across-replica variance of the plain and averaged estimates at t = k / rho."""
    from .schedules import ScheduleSpec, constant

    ks = np.asarray(ks, dtype=np.float64)
    ts = np.rint(ks / rho).astype(np.int64)
    spec = DensityEnsemble(
        scenario, kernel, ScheduleSpec(constant(rho), constant(theta)), bounds,
        np.atleast_1d(query), int(ts.max()), replicas, seed, record=ts,
    )
    rec = run_density(spec, workers)
    z = rec.z[:, :, 0]
    c = rec.cesaro[:, :, 0]
    truth = rec.truth[:, 0]
    return CesaroComparison(
        ks, ts,
        z.var(axis=0, ddof=1), c.var(axis=0, ddof=1),
        ((z - truth) ** 2).mean(axis=0), ((c - truth) ** 2).mean(axis=0),
    )


@dataclass
class LyapunovTrace:
    v: np.ndarray
    rho: np.ndarray
    w: np.ndarray
    gamma: np.ndarray


def instrumented_density_run(
    scenario, kernel: KernelSpec, schedule, bounds: DensityBounds, query: float, steps: int, seed: int,
    noise: bool = True,
) -> LyapunovTrace:
    """Single stationary run decomposed as v_{t+1} <= v_t - rho_t w_t + gamma_t.

    v_t = (z^t - g)^2, w_t = 2 v_t - 4 gbar |g - g_theta_t|,
    gamma_t = rho_t^2 xi_t^2 + 2 rho_t (xi_t - (z^t - g_theta_t)) (g - z^t).
    With ``noise=False`` the stochastic gradient is replaced by its mean, so
    gamma_t reduces to rho_t^2 (z^t - g_theta_t)^2.
    """
    from .density import mollified_density

    x = np.array([[float(query)]])
    g = float(scenario.density(0, x)[0])
    rho = schedule.rho_values(0, steps)
    theta = schedule.theta_values(0, steps)
    if kernel.family == "gaussian" and hasattr(scenario, "smoothed_density"):
        smooth = scenario.smoothed_density(0, x, theta[:, None])[:, 0]
    else:
        cache = {}
        smooth = np.array([cache.setdefault(th, mollified_density(scenario, x, th, kernel)) for th in theta])
    pts, _ = scenario.sample_block(0, steps, stream(seed, 0))
    kv = kernel((pts[:, 0] - x[0, 0]) / theta) / theta
    z = bounds.lower
    v = np.empty(steps + 1)
    gam = np.empty(steps)
    w = np.empty(steps)
    v[0] = (z - g) ** 2
    for t in range(steps):
        grad = z - smooth[t]
        xi = z - kv[t] if noise else grad
        w[t] = 2 * v[t] - 4 * bounds.cap * abs(g - smooth[t])
        gam[t] = rho[t] ** 2 * xi**2 + 2 * rho[t] * (xi - grad) * (g - z)
        z = min(max(z - rho[t] * xi, bounds.lower), bounds.upper)
        v[t + 1] = (z - g) ** 2
    return LyapunovTrace(v, rho, w, gam)
