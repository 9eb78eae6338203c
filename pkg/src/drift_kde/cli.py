"""Command line entry point: ``drift-kde run`` and ``drift-kde verify-lemmas``.

Exit status: 0 on success, 1 on configuration errors (including infeasible
constraint sets), 2 when a verification fails.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import bounds as bnd
from .config import ConfigError, ExperimentConfig, load_config
from .density import DensityBounds
from .experiments import (
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
)
from .grid import GridSpec, InfeasibleProjection
from .kernels import KernelSpec, width_characteristic
from .regression import RegressionConstraint
from .scenarios import (
    GaussianMixtureScenario,
    RegressionScenario,
    Shift,
    TriangularScenario,
    UniformScenario,
    drifting_normal,
)
from .schedules import (
    ScheduleSpec,
    drift_schedule,
    optimal_drift_exponents,
    optimal_stationary_exponents,
    parse_rule,
    stationary_schedule,
)

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY = 0, 1, 2


def fmt(v) -> str:
    """Shortest round-trip decimal for floats; vectors joined with ';'."""
    if isinstance(v, (list, tuple, np.ndarray)):
        return ";".join(fmt(x) for x in np.asarray(v).reshape(-1))
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


@dataclass
class RunReport:
    mode: str
    path: Path | None
    header: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    passed: bool = True


# ---------------------------------------------------------------------------
# builders


def build_scenario(cfg: ExperimentConfig):
    name = cfg.scenario
    if name == "drifting-normal":
        return drifting_normal(cfg.drift, cfg.drift_mode, cfg.amplitude)
    if name in ("normal-mixture", "normal-2d"):
        if cfg.drift_mode != "linear":
            raise ConfigError(f"scenario {name} supports linear drift only")
        if name == "normal-mixture":
            return GaussianMixtureScenario(
                [0.3, 0.7], [[-1.5], [1.0]], [0.5, 0.8], dim=1,
                shift=Shift(velocity=(cfg.drift,), direction=(1.0,)),
            )
        return GaussianMixtureScenario(
            [1.0], [[0.0, 0.0]], [1.0], dim=2,
            shift=Shift(velocity=(cfg.drift, 0.0), direction=(1.0, 0.0)),
        )
    if name in ("uniform", "triangular"):
        if cfg.drift != 0:
            raise ConfigError(f"scenario {name} is stationary; drift must be 0")
        return UniformScenario(0.0, 1.0) if name == "uniform" else TriangularScenario(-1.0, 0.0, 1.0)
    family = "sine" if name == "regression-sine" else "linear"
    return RegressionScenario(
        family, cfg.amplitudes, cfg.noise, input_std=cfg.input_std, eps=cfg.eps, omega=cfg.omega,
    )


def _nu(scenario) -> float:
    return float(getattr(scenario, "holder_exponent", 1.0))


def build_schedule(cfg: ExperimentConfig, dim: int, nu: float):
    if cfg.auto:
        kind, _, arg = cfg.auto.partition(":")
        if kind == "drift":
            try:
                return drift_schedule(float(arg), dim, nu)
            except ValueError as exc:
                raise ConfigError(f"auto: {exc}") from None
        if kind == "stationary" and not arg:
            return stationary_schedule(dim, nu, cfg.rho_scale, cfg.theta_scale)
        raise ConfigError(f"auto must be drift:<delta> or stationary, got {cfg.auto!r}")
    try:
        return ScheduleSpec(parse_rule(cfg.rho), parse_rule(cfg.theta))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_constraint(cfg: ExperimentConfig, m: int) -> RegressionConstraint:
    kind, _, arg = cfg.constraint.partition(":")
    try:
        vals = [float(v) for v in arg.split(",")]
        if kind == "box" and len(vals) == 2:
            return RegressionConstraint.box([vals[0]] * m, [vals[1]] * m)
        if kind == "ball" and len(vals) == 1:
            return RegressionConstraint.ball([0.0] * m, vals[0])
    except ValueError as exc:
        raise ConfigError(f"constraint: {exc}") from None
    raise ConfigError(f"constraint must be box:<lo>,<hi> or ball:<radius>, got {cfg.constraint!r}")


def _queries(cfg, dim: int) -> np.ndarray:
    pts = cfg.query
    if dim == 1:
        flat = [v for p in pts for v in p]
        return np.array(flat, dtype=np.float64)[:, None]
    arr = np.array(pts, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ConfigError(f"query points must have {dim} coordinates separated by ','; points by ';'")
    return arr


def _kernel(cfg, dim: int) -> KernelSpec:
    try:
        return KernelSpec(cfg.kernel, dim)
    except ValueError as exc:
        raise ConfigError(f"kernel: {exc}") from None


# ---------------------------------------------------------------------------
# output


def _header(cfg: ExperimentConfig, extra: list) -> list[str]:
    lines = ["# drift-kde experiment output"]
    lines += [f"# config.{k} = {v}" for k, v in cfg.echo()]
    lines += [f"# {k} = {v}" for k, v in extra]
    return lines


def _write(path: Path, header: list[str], columns: list[str], rows) -> None:
    buf = io.StringIO()
    for line in header:
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _density_certs(scenario, kernel: KernelSpec, bounds: DensityBounds) -> list:
    nu = scenario.holder_exponent
    out = [
        ("cert.gbar_density", fmt(scenario.gbar)),
        ("cert.gbar_class", fmt(bounds.cap)),
        ("cert.H", fmt(scenario.holder_constant)),
        ("cert.nu", fmt(nu)),
        ("cert.delta", fmt(scenario.drift_cap)),
        ("cert.kbar", fmt(kernel.sup_bound)),
        ("cert.A", fmt(width_characteristic(kernel, nu))),
    ]
    for key, val in scenario.describe().items():
        out.append((f"scenario.{key}", fmt(val) if not isinstance(val, str) else val))
    return out


def _exponents(dim: int, nu: float) -> list:
    a, b = optimal_drift_exponents(dim, nu)
    p, q, g = optimal_stationary_exponents(dim, nu)
    return [
        ("exponent.alpha_star", fmt(a)),
        ("exponent.beta_star", fmt(b)),
        ("exponent.p_star", fmt(p)),
        ("exponent.q_star", fmt(q)),
        ("exponent.gamma_star", fmt(g)),
    ]


def _schedule_echo(sched) -> list:
    return [(f"schedule.{k}", v) for k, v in sched.describe().items()]


def _trace_rows(t, queries, z, cesaro, truth, sq):
    R, C, Q = z.shape[:3]
    for i in range(R):
        for c in range(C):
            for j in range(Q):
                yield [
                    str(i), str(int(t[c])), fmt(queries[j]), fmt(z[i, c, j]),
                    fmt(cesaro[i, c, j]), fmt(truth[c, j]), fmt(sq[i, c, j]),
                ]


TRACE_COLUMNS = ["replica", "t", "x", "z", "cesaro", "truth", "sq_error"]


# ---------------------------------------------------------------------------
# modes


def run_experiment(cfg: ExperimentConfig, out_dir: Path, workers: int = 1) -> RunReport:
    out_dir = Path(out_dir)
    if cfg.mode == "verify-lemmas":
        return _verify(cfg, out_dir)
    scenario = build_scenario(cfg)
    is_regression = isinstance(scenario, RegressionScenario)
    dim = scenario.dim
    nu = _nu(scenario)
    kernel = _kernel(cfg, dim)
    if cfg.mode in ("track-regression",) and not is_regression:
        raise ConfigError("track-regression needs a regression scenario")
    if cfg.mode in ("track-density", "track-grid", "drift-sweep", "cesaro-compare") and is_regression:
        raise ConfigError(f"{cfg.mode} needs a density scenario")
    try:
        dbounds = DensityBounds(*cfg.bounds)
    except ValueError as exc:
        raise ConfigError(f"bounds: {exc}") from None
    extra = _exponents(dim, nu)

    if cfg.mode == "drift-sweep":
        return _sweep(cfg, kernel, dbounds, out_dir, workers, extra)
    if cfg.mode == "cesaro-compare":
        return _cesaro(cfg, scenario, kernel, dbounds, out_dir, workers, extra)

    sched = build_schedule(cfg, dim, nu)
    extra += _schedule_echo(sched)
    queries = _queries(cfg, dim)

    if is_regression:
        return _regression(cfg, scenario, kernel, sched, queries, out_dir, workers, extra)
    extra = _density_certs(scenario, kernel, dbounds) + extra
    if cfg.mode == "track-grid":
        return _grid(cfg, scenario, kernel, sched, out_dir, workers, extra)
    spec = DensityEnsemble(scenario, kernel, sched, dbounds, queries, cfg.steps, cfg.replicas, cfg.seed, cfg.batch)
    rec = run_density(spec, workers)
    mse, se = rec.mse()
    if cfg.mode == "rate-fit":
        return _rate_report(cfg, rec.t, mse[:, 0], se[:, 0], out_dir, extra, _power_law_bound_lines(cfg, sched, scenario, kernel, dbounds, rec.t))
    path = out_dir / "trace.csv"
    _write(path, _header(cfg, extra), TRACE_COLUMNS,
           _trace_rows(rec.t, rec.queries, rec.z, rec.cesaro, rec.truth, rec.sq_error))
    return RunReport(cfg.mode, path, aggregates={"t": rec.t, "mse": mse, "stderr": se})


def _power_law_bound_lines(cfg, sched, scenario, kernel, dbounds, ts):
    rho, theta = sched.rho, sched.theta
    if not hasattr(rho, "exponent") or not (0 < rho.exponent <= 1 and 2 * rho.scale > rho.exponent):
        return [], None
    if not math.isfinite(scenario.holder_constant):
        return [], None
    nu = scenario.holder_exponent
    args = dict(
        v0=max(dbounds.lower, dbounds.cap) ** 2, rho=rho.scale, p=rho.exponent, theta=theta.scale,
        q=theta.exponent, r=scenario.dim, nu=nu, A=width_characteristic(kernel, nu),
        H=scenario.holder_constant, gbar=dbounds.cap, kbar=kernel.sup_bound,
    )
    consts = bnd.theorem5_constants(**args)
    lines = [(f"bound.power_law_{k}", fmt(v)) for k, v in consts.items()]
    return lines, bnd.theorem5_bound(**args, t=ts)


def _rate_report(cfg, ts, mse, se, out_dir, extra, bound_info):
    lines, bound = bound_info
    lo, hi = cfg.window if cfg.window else (100.0, float(cfg.steps))
    fit = fit_rate(ts, mse, (lo, hi))
    extra = extra + lines + [
        ("result.window", f"{fmt(lo)},{fmt(hi)}"),
        ("result.slope", fmt(fit.slope)),
        ("result.slope_stderr", fmt(fit.stderr)),
        ("result.fit_points", fmt(fit.n_points)),
    ]
    dominated = None
    if bound is not None:
        dominated = bool(np.all(mse <= bound))
        extra.append(("result.bound_dominates_all_checkpoints", fmt(dominated)))
    path = out_dir / "rate.csv"
    rows = ([str(int(t)), fmt(m), fmt(s)] for t, m, s in zip(ts, mse, se))
    _write(path, _header(cfg, extra), ["t", "mse", "stderr"], rows)
    return RunReport(cfg.mode, path, aggregates={"fit": fit, "t": ts, "mse": mse, "stderr": se, "bound": bound, "dominated": dominated})


def _regression(cfg, scenario, kernel, sched, queries, out_dir, workers, extra):
    constraint = build_constraint(cfg, scenario.m)
    certs = scenario.certificates(queries[0])
    extra = [(f"cert.{k}", fmt(v) if v is not None else "none") for k, v in certs.__dict__.items()] + [
        ("cert.kbar", fmt(kernel.sup_bound)),
        ("cert.A", fmt(width_characteristic(kernel, certs.nu))),
        ("cert.y_set_norm", fmt(constraint.norm_bound)),
    ] + [(f"scenario.{k}", fmt(v) if not isinstance(v, str) else v) for k, v in scenario.describe().items()] + extra
    spec = RegressionEnsemble(scenario, kernel, sched, constraint, queries, cfg.steps, cfg.replicas, cfg.seed, cfg.batch)
    rec = run_regression(spec, workers)
    mse, se = rec.mse()
    if cfg.mode == "rate-fit":
        return _rate_report(cfg, rec.t, mse[:, 0], se[:, 0], out_dir, extra, ([], None))
    path = out_dir / "trace.csv"
    R, C, Q = rec.z.shape[:3]

    def rows():
        for i in range(R):
            for c in range(C):
                for j in range(Q):
                    yield [
                        str(i), str(int(rec.t[c])), fmt(rec.queries[j]), fmt(rec.z[i, c, j]),
                        fmt(rec.cesaro[i, c, j]), fmt(rec.truth[c, j]), fmt(rec.sq_error[i, c, j]),
                    ]

    _write(path, _header(cfg, extra), TRACE_COLUMNS, rows())
    return RunReport(cfg.mode, path, aggregates={"t": rec.t, "mse": mse, "stderr": se})


def _grid(cfg, scenario, kernel, sched, out_dir, workers, extra):
    if scenario.dim != 1:
        raise ConfigError("track-grid needs a one-dimensional scenario")
    a, b, m = cfg.grid
    try:
        grid = GridSpec.uniform(a, b, m)
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None
    lo, hi = cfg.bounds
    spec = GridEnsemble(scenario, kernel, sched, grid, lo, hi, cfg.normalized, cfg.steps, cfg.replicas, cfg.seed)
    rec = run_grid(spec, workers)
    ise = rec.ise()
    mean_ise = ise.mean(axis=0)
    extra = extra + [(f"grid.{k}", fmt(v)) for k, v in grid.describe().items()] + [
        ("result.initial_ise", fmt(mean_ise[0])),
        ("result.final_ise", fmt(mean_ise[-1])),
    ]
    path = out_dir / "grid_trace.csv"

    def rows():
        for i in range(rec.values.shape[0]):
            for c, t in enumerate(rec.t):
                for j, x in enumerate(grid.points):
                    d = rec.values[i, c, j] - rec.truth[c, j]
                    yield [str(i), str(int(t)), fmt(x), fmt(rec.values[i, c, j]), fmt(rec.truth[c, j]), fmt(d * d)]

    _write(path, _header(cfg, extra), ["replica", "t", "x", "z", "truth", "sq_error"], rows())
    return RunReport(cfg.mode, path, aggregates={"t": rec.t, "ise": mean_ise})


def _sweep(cfg, kernel, dbounds, out_dir, workers, extra):
    queries = _queries(cfg, 1)
    rows = drift_sweep(cfg.deltas, kernel, dbounds, queries[:, 0], cfg.replicas, cfg.seed,
                       amplitude=cfg.amplitude, workers=workers, burn_factor=cfg.burn_factor)
    deltas = np.array([r.delta for r in rows])
    mses = np.array([r.steady_mse for r in rows])
    fit = loglog_slope(deltas, mses)
    extra = extra + [("result.slope", fmt(fit.slope)), ("result.slope_stderr", fmt(fit.stderr))]
    sc0 = drifting_normal(rows[0].delta, "oscillate", cfg.amplitude)
    A = width_characteristic(kernel, sc0.holder_exponent)
    for r in rows:
        b = bnd.DensityBoundInputs(
            dbounds.cap, kernel.sup_bound, A, sc0.holder_constant, sc0.holder_exponent, 1,
            r.delta, r.rho, r.theta, t=r.burn_in, v0=max(dbounds.lower, dbounds.cap) ** 2,
        )
        det, var = bnd.theorem1_bound(b)
        r.extra.update(det=det, var=var, dominated=r.steady_mse <= det + 4 * math.sqrt(var / cfg.replicas))
        extra += [
            (f"bound.delta_{fmt(r.delta)}", f"det={fmt(det)} var={fmt(var)} dominated={fmt(r.extra['dominated'])}"),
            (f"run.delta_{fmt(r.delta)}", f"burn_in={r.burn_in} window={r.window} omega={fmt(r.extra['omega'])}"),
        ]
    path = out_dir / "sweep.csv"
    out_rows = ([fmt(r.delta), fmt(r.rho), fmt(r.theta), fmt(r.steady_mse), fmt(r.stderr)] for r in rows)
    _write(path, _header(cfg, extra), ["delta", "rho", "theta", "steady_mse", "stderr"], out_rows)
    return RunReport(cfg.mode, path, aggregates={"rows": rows, "fit": fit})


def _cesaro(cfg, scenario, kernel, dbounds, out_dir, workers, extra):
    try:
        rho = parse_rule(cfg.rho)
        theta = parse_rule(cfg.theta)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not (rho.is_constant and theta.is_constant):
        raise ConfigError("cesaro-compare needs constant rho and theta")
    queries = _queries(cfg, scenario.dim)
    cmp = cesaro_compare(scenario, kernel, rho.scale, theta.scale, dbounds, queries[0], cfg.ks,
                         cfg.replicas, cfg.seed, workers)
    fc, fs = cmp.slopes()
    extra = _density_certs(scenario, kernel, dbounds) + extra + [
        ("result.cesaro_variance_slope", fmt(fc.slope)),
        ("result.sqg_variance_slope", fmt(fs.slope)),
    ]
    path = out_dir / "cesaro.csv"
    rows = (
        [fmt(k), str(int(t)), fmt(a), fmt(b), fmt(c), fmt(d)]
        for k, t, a, b, c, d in zip(cmp.ks, cmp.t, cmp.var_sqg, cmp.var_cesaro, cmp.mse_sqg, cmp.mse_cesaro)
    )
    _write(path, _header(cfg, extra), ["k", "t", "var_sqg", "var_cesaro", "mse_sqg", "mse_cesaro"], rows)
    return RunReport(cfg.mode, path, aggregates={"comparison": cmp, "cesaro_fit": fc, "sqg_fit": fs})


def _verify(cfg, out_dir: Path | None) -> RunReport:
    rows = bnd.run_lemma_suite(cfg.seed)
    passed = all(r.passed for r in rows)
    path = None
    if out_dir is not None:
        path = out_dir / "lemmas.csv"
        _write(path, _header(cfg, [("result.all_passed", fmt(passed))]), ["name", "passed", "detail"],
               ([r.name, fmt(r.passed), r.detail] for r in rows))
    return RunReport("verify-lemmas", path, aggregates={"rows": rows}, passed=passed)


def _print_table(rows) -> None:
    width = max(len(r.name) for r in rows)
    for r in rows:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {status}  {r.detail}")


# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drift-kde", description="Recursive density and regression tracking experiments")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment described by a config file")
    run.add_argument("config")
    run.add_argument("--seed", type=int, default=None, help="override the base seed")
    run.add_argument("--out", default=".", help="output directory")
    run.add_argument("--workers", type=int, default=1, help="worker processes for replicas")
    ver = sub.add_parser("verify-lemmas", help="run the recursive-sequence verifiers")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--out", default=None, help="also write lemmas.csv here")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "verify-lemmas":
        cfg = ExperimentConfig(mode="verify-lemmas", seed=args.seed)
        report = _verify(cfg, Path(args.out) if args.out else None)
        _print_table(report.aggregates["rows"])
        return EXIT_OK if report.passed else EXIT_VERIFY
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        report = run_experiment(cfg, Path(args.out), args.workers)
    except (ConfigError, InfeasibleProjection, OSError) as exc:
        print(f"drift-kde: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if report.mode == "verify-lemmas":
        _print_table(report.aggregates["rows"])
    elif report.path is not None:
        print(f"wrote {report.path}")
    return EXIT_OK if report.passed else EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
