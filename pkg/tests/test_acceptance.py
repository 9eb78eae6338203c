"""Acceptance criteria 1-11.

Each test is named ``test_cNN_*`` after the criterion it checks; the
conftest prints one PASS/FAIL line per criterion at the end of the run.
Monte Carlo sizes and tolerances are the criteria's own.
"""
import math

import numpy as np
import pytest

from drift_kde.bounds import DensityBoundInputs, RegressionBoundInputs, run_lemma_suite, theorem1_bound, theorem5_bound, theorem7_bound
from drift_kde.cli import main
from drift_kde.density import DensityBounds, DensityTrackerState, mollified_density, parzen_estimate, sqg_density_step
from drift_kde.experiments import (
    DensityEnsemble,
    GridEnsemble,
    RegressionEnsemble,
    cesaro_compare,
    drift_sweep,
    fit_rate,
    loglog_slope,
    run_density,
    run_grid,
    run_regression,
    steady_state,
)
from drift_kde.grid import GridSpec, project_onto_G
from drift_kde.kernels import FAMILIES, kernel, width_characteristic
from drift_kde.regression import RegressionConstraint, nadaraya_watson
from drift_kde.rng import normals, stream, uniforms
from drift_kde.scenarios import RegressionScenario, TriangularScenario, drifting_normal, normal_2d, normal_mixture
from drift_kde.schedules import ScheduleSpec, constant, optimal_stationary_exponents, power, stationary_schedule
from oracles import qp_projection_bruteforce

pytestmark = pytest.mark.slow

SEED = 2024


# ---------------------------------------------------------------------------
# 1. recursive estimate with rho_t = 1/(t+1) is the Parzen estimate


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("theta", [0.1, 0.5, 2.0])
def test_c01_recursion_reproduces_parzen(family, theta, record_property):
    k = kernel(family)
    sc = drifting_normal(0.0)
    T = 10_000
    pts, _ = sc.sample_block(0, T, stream(SEED, 1))
    sched = ScheduleSpec(power(1.0, 1.0), constant(theta))
    worst = 0.0
    for x in (-0.7, 0.0, 1.1):
        s = DensityTrackerState.start(x, k, sched, DensityBounds.unconstrained(), z0=0.0)
        for t in range(T):
            s = sqg_density_step(s, pts[t])
        ref = parzen_estimate(pts, x, theta, k)
        rel = abs(s.z - ref) / abs(ref)
        worst = max(worst, rel)
    record_property("max_rel_err", f"{worst:.2e}")
    assert worst <= 1e-12


# ---------------------------------------------------------------------------
# 2. smoothing bias within A H theta^nu


BIAS_SCENARIOS = {
    "normal": drifting_normal(0.0),
    "mixture": normal_mixture(),
    "triangular": TriangularScenario(-1.0, 0.0, 1.0),
    "normal-2d": normal_2d(),
}


@pytest.mark.parametrize("name", list(BIAS_SCENARIOS))
def test_c02_bias_bound(name, record_property):
    sc = BIAS_SCENARIOS[name]
    k = kernel("gaussian", sc.dim)
    nu = sc.holder_exponent
    A = width_characteristic(k, nu)
    xs = np.array([-1.0, -0.4, 0.0, 0.3, 0.9])
    worst = -math.inf
    for theta in (0.5, 0.2, 0.1, 0.05):
        for x in xs:
            q = np.full(sc.dim, x) if sc.dim > 1 else x
            err = abs(mollified_density(sc, q, theta, k) - sc.density_at(0, q))
            slack = A * sc.holder_constant * theta**nu + 1e-7 - err
            worst = max(worst, -slack)
            assert slack >= 0, (theta, x, err)
    record_property("max_excess", f"{worst:.3e}")


# ---------------------------------------------------------------------------
# 3-4. stationary rate and its bound


@pytest.fixture(scope="module")
def stationary_run():
    sc = drifting_normal(0.0)
    k = kernel("gaussian")
    bounds = DensityBounds(0.0, 1.0)
    sched = stationary_schedule(1, 1.0)
    spec = DensityEnsemble(sc, k, sched, bounds, np.array([0.0]), 100_000, 400, SEED)
    rec = run_density(spec)
    mse, _ = rec.mse()
    return sc, k, bounds, rec.t, mse[:, 0]


def test_c03_stationary_rate(stationary_run, record_property):
    _, _, _, t, mse = stationary_run
    fit = fit_rate(t, mse, (1e2, 1e5))
    record_property("slope", f"{fit.slope:.4f}")
    record_property("stderr", f"{fit.stderr:.4f}")
    assert fit.slope == pytest.approx(-0.5, abs=0.15)


def test_c04_power_law_bound_dominates(stationary_run, record_property):
    sc, k, bounds, t, mse = stationary_run
    p, q, _ = optimal_stationary_exponents(1, sc.holder_exponent)
    bound = theorem5_bound(
        v0=bounds.cap**2, rho=1.0, p=p, theta=1.0, q=q, r=1, nu=sc.holder_exponent,
        A=width_characteristic(k, sc.holder_exponent), H=sc.holder_constant, gbar=bounds.cap, kbar=k.sup_bound, t=t,
    )
    ratio = mse / bound
    record_property("max_mse_over_bound", f"{ratio.max():.3e}")
    assert np.all(mse <= bound)


# ---------------------------------------------------------------------------
# 5-6. drift scaling and its bound


DELTAS = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4]


@pytest.fixture(scope="module")
def sweep():
    k = kernel("gaussian")
    bounds = DensityBounds(0.0, 1.0)
    rows = drift_sweep(DELTAS, k, bounds, 0.0, replicas=200, seed=SEED)
    return k, bounds, rows


def test_c05_drift_scaling(sweep, record_property):
    _, _, rows = sweep
    fit = loglog_slope([r.delta for r in rows], [r.steady_mse for r in rows])
    record_property("slope", f"{fit.slope:.4f}")
    record_property("mse", ";".join(f"{r.steady_mse:.3e}" for r in rows))
    assert fit.slope == pytest.approx(0.25, abs=0.10)


def test_c06_constant_parameter_bound_dominates(sweep, record_property):
    k, bounds, rows = sweep
    R = 200
    ratios = []
    for r in rows:
        sc = drifting_normal(r.delta, "oscillate")
        b = DensityBoundInputs(
            bounds.cap, k.sup_bound, width_characteristic(k, sc.holder_exponent), sc.holder_constant,
            sc.holder_exponent, 1, sc.drift_cap, r.rho, r.theta, t=r.burn_in, v0=bounds.cap**2,
        )
        det, var = theorem1_bound(b)
        ratios.append(r.steady_mse / (det + 4 * math.sqrt(var / R)))
    record_property("max_mse_over_bound", f"{max(ratios):.3e}")
    assert max(ratios) <= 1.0


# ---------------------------------------------------------------------------
# 7. averaged vs plain estimates


def test_c07_cesaro_variance_law(record_property):
    cmp = cesaro_compare(
        drifting_normal(0.0), kernel("gaussian"), 0.02, 0.3, DensityBounds(0.0, 1.0), 0.0,
        [1, 2, 4, 8, 16], replicas=400, seed=SEED,
    )
    fc, fs = cmp.slopes()
    record_property("cesaro_slope", f"{fc.slope:.4f}")
    record_property("sqg_slope", f"{fs.slope:.4f}")
    ok_c = abs(fc.slope + 1.0) <= 0.2
    ok_s = abs(fs.slope) <= 0.2
    assert ok_c and ok_s, (fc.slope, fs.slope)


# ---------------------------------------------------------------------------
# 8. regression


def test_c08_nadaraya_watson_is_weighted_least_squares(record_property):
    state = stream(SEED, 8)
    worst = 0.0
    for i in range(200):
        u, state = uniforms(state, 6)
        r = 1 + int(u[0] * 2)
        m = 1 + int(u[1] * 3)
        n = 2 + int(u[2] * 60)
        fam = FAMILIES[int(u[3] * 3)]
        theta = 0.2 + 2.0 * u[4]
        g, state = normals(state, n * (r + m))
        xs = g[: n * r].reshape(n, r)
        ys = 3.0 * g[n * r :].reshape(n, m)
        k = kernel(fam, r)
        # query at a sample so compact kernels see mass
        x = xs[int(u[5] * n)]
        w = k((xs - x) / theta)
        # independent route: least squares of sqrt(w) y on sqrt(w) * 1
        sw = np.sqrt(w)
        ref = np.linalg.lstsq(sw[:, None], sw[:, None] * ys, rcond=None)[0][0]
        est = nadaraya_watson(list(zip(xs, ys)), x, theta, k)
        err = float(np.max(np.abs(est - ref)) / (1 + np.max(np.abs(ys))))
        worst = max(worst, err)
    record_property("max_err", f"{worst:.2e}")
    assert worst <= 1e-12


def test_c08_regression_stationary_rate(record_property):
    sc = RegressionScenario("sine", (1.0,))
    p, q, gamma = optimal_stationary_exponents(1, 1.0)
    sched = ScheduleSpec(power(3.0, p), power(0.5, q))
    spec = RegressionEnsemble(
        sc, kernel("gaussian"), sched, RegressionConstraint.box([-2.0], [2.0]), np.array([0.3]), 100_000, 200, SEED,
    )
    rec = run_regression(spec)
    mse, _ = rec.mse()
    fit = fit_rate(rec.t, mse[:, 0], (1e2, 1e5))
    record_property("slope", f"{fit.slope:.4f}")
    assert fit.slope == pytest.approx(-gamma, abs=0.15)


def test_c08_regression_bound_dominates_drifting_run(record_property):
    sc = RegressionScenario("sine", (1.0,), eps=0.2, omega=1e-3)
    k = kernel("gaussian")
    rho, theta, x, R = 0.05, 0.3, 0.3, 200
    box = RegressionConstraint.box([-2.0], [2.0])
    burn = math.ceil(5 / rho)
    period = math.ceil(2 * math.pi / sc.omega)
    steps = burn + period
    spec = RegressionEnsemble(
        sc, k, ScheduleSpec(constant(rho), constant(theta)), box, np.array([x]), steps, R, SEED,
        record=np.arange(burn + 1, steps + 1),
    )
    rec = run_regression(spec)
    mse, _ = steady_state(rec, burn)
    cert = sc.certificates(x)
    c = RegressionBoundInputs(
        g1_lower=cert.g1_lower, g1_bar=cert.g1_bar, y_norm=box.norm_bound, y_norm_x=cert.y_support_norm,
        A=width_characteristic(k, cert.nu), B=cert.B, C=cert.C, kbar=k.sup_bound, nu=cert.nu, r=1,
        n_min=1, g3_bar=cert.g3_bar,
    )
    v0 = float(np.sum(sc.regression_truth(0, x) ** 2))
    det, var = theorem7_bound(c, cert.delta, rho, theta, v0, burn)
    bound = det + 4 * math.sqrt(var / R)
    record_property("steady_mse", f"{mse:.3e}")
    record_property("bound", f"{bound:.3e}")
    assert mse <= bound


# ---------------------------------------------------------------------------
# 9. grid projection and tracking


def test_c09_projection_matches_oracle(record_property):
    state = stream(SEED, 9)
    worst = 0.0
    for i in range(500):
        m = 2 + i % 3
        u, state = uniforms(state, 3 * m + 2)
        w = 0.1 + u[:m]
        w = w / w.sum()
        h = 0.3 + 2.0 * u[m : 2 * m]
        z = -2.0 + 5.0 * u[2 * m : 3 * m]
        lower = 0.3 * u[-2]
        upper = 1.2 + 2.0 * u[-1]
        g = GridSpec(np.arange(m, dtype=np.float64), w, h)
        ref = qp_projection_bruteforce(z, w, h, lower, upper)
        for method in ("bisection", "breakpoints"):
            y = project_onto_G(z, g, lower, upper, method=method)
            worst = max(worst, float(np.max(np.abs(y - ref))))
            assert np.all(y >= lower - 1e-12) and np.all(y <= upper + 1e-12)
            assert abs(float(w @ y) - 1.0) <= 1e-9
            again = project_onto_G(y, g, lower, upper, method=method)
            assert np.max(np.abs(again - y)) <= 1e-9
    record_property("max_oracle_err", f"{worst:.2e}")
    assert worst <= 1e-9


def test_c09_grid_tracker_reduces_ise(record_property):
    g = GridSpec.uniform(-4.0, 4.0, 40)
    spec = GridEnsemble(drifting_normal(0.0), kernel("gaussian"), stationary_schedule(1, 1.0), g, 0.0, 1.0, True, 100_000, 2, SEED)
    ise = run_grid(spec).ise().mean(axis=0)
    record_property("reduction", f"{ise[0] / ise[-1]:.1f}")
    assert ise[-1] * 10 <= ise[0]


# ---------------------------------------------------------------------------
# 10. recursive-sequence verifiers


def test_c10_lemma_suite(record_property):
    rows = run_lemma_suite(SEED, n_random=500)
    failed = [r for r in rows if not r.passed]
    for r in failed:
        record_property(r.name, r.detail)
    assert any(r.name == "A4 constant rho flagged" and r.passed for r in rows)
    assert not failed


# ---------------------------------------------------------------------------
# 11. determinism


CONFIGS = {
    "track": """\
mode = track-density
scenario = drifting-normal
drift = 1e-3
kernel = epanechnikov
rho = const:0.05
theta = const:0.4
query = -0.5,0,0.5
steps = 300
replicas = 60
""",
    "rate": """\
mode = rate-fit
scenario = normal-mixture
auto = stationary
steps = 20000
replicas = 60
""",
    "regression": """\
mode = track-regression
scenario = regression-linear
amplitudes = 0.5,-1
constraint = ball:3
auto = stationary
rho_scale = 0.9
steps = 200
replicas = 55
query = 0.2
""",
}


@pytest.mark.parametrize("name", list(CONFIGS))
def test_c11_byte_identical_reruns(name, tmp_path):
    cfg = tmp_path / f"{name}.cfg"
    cfg.write_text(CONFIGS[name], encoding="utf-8")
    outs = []
    for tag, workers in (("a", 1), ("b", 1), ("c", 3)):
        d = tmp_path / tag
        assert main(["run", str(cfg), "--out", str(d), "--seed", "17", "--workers", str(workers)]) == 0
        (f,) = list(d.iterdir())
        outs.append(f.read_bytes())
    assert outs[0] == outs[1] == outs[2]
