import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from drift_kde.grid import (
    GridEstimate,
    GridSpec,
    InfeasibleProjection,
    grid_sqg_step,
    project_onto_G,
    uniform_start,
    weighted_ise,
)
from drift_kde.kernels import KernelSpec
from oracles import qp_projection_bruteforce


def _grid(w, h=1.0):
    w = np.asarray(w, dtype=np.float64)
    return GridSpec(np.cumsum(w) - w / 2, w, np.broadcast_to(h, w.shape))


def test_step_symmetric_example():
    g = _grid([0.5, 0.5])
    est = GridEstimate(np.array([1.0, 1.0]), np.zeros(2), np.full(2, 2.0), True)
    out = grid_sqg_step(est, g, 100.0, 0.5, 1.0, KernelSpec("box"))
    assert np.allclose(out.values, [1.0, 1.0], atol=1e-12)


def test_step_unnormalized_matches_pointwise_update():
    from drift_kde.density import DensityBounds, DensityTrackerState, sqg_density_step
    from drift_kde.schedules import ScheduleSpec, constant

    g = GridSpec.uniform(-1, 1, 5)
    k = KernelSpec("epanechnikov")
    est = GridEstimate(np.full(5, 0.3), np.zeros(5), np.full(5, 10.0), False)
    out = grid_sqg_step(est, g, 0.2, 0.1, 0.7, k)
    for i, x in enumerate(g.points):
        s = DensityTrackerState.start(x, k, ScheduleSpec(constant(0.1), constant(0.7)), DensityBounds(0, 10), z0=0.3)
        assert out.values[i] == pytest.approx(sqg_density_step(s, [0.2]).z, abs=1e-15)


def test_projection_shift_example():
    g = _grid([0.5, 0.5])
    assert np.allclose(project_onto_G([0.8, 1.6], g, 0, 2), [0.6, 1.4], atol=1e-12)


def test_projection_examples():
    g = _grid([1 / 3] * 3)
    assert np.allclose(project_onto_G([0.0, 0.0, 0.0], g, 0, 3), [1, 1, 1], atol=1e-12)
    feasible = np.array([0.5, 1.5, 1.0])
    assert np.allclose(project_onto_G(feasible, g, 0, 3), feasible, atol=1e-12)


@pytest.mark.parametrize("method", ["bisection", "breakpoints"])
def test_projection_matches_bruteforce_m4(method):
    rng = np.random.default_rng(4)
    for _ in range(50):
        w = rng.uniform(0.1, 1.0, 4)
        w /= w.sum()
        h = rng.uniform(0.5, 2.0, 4)
        z = rng.uniform(-1.0, 3.0, 4)
        g = GridSpec(np.arange(4.0), w, h)
        ref = qp_projection_bruteforce(z, w, h, 0.0, 2.0)
        assert np.allclose(project_onto_G(z, g, 0.0, 2.0, method=method), ref, atol=1e-9)


def test_infeasible_directions():
    g = _grid([0.5, 0.5])
    with pytest.raises(InfeasibleProjection) as e:
        project_onto_G([0, 0], g, 1.5, 3.0)
    assert e.value.direction == "lower"
    with pytest.raises(InfeasibleProjection) as e:
        project_onto_G([0, 0], g, 0.0, 0.5)
    assert e.value.direction == "upper"
    with pytest.raises(InfeasibleProjection):
        project_onto_G([0, 0], g, [0, 1], [1, 0.5])


def test_unbounded_above_and_batched():
    g = GridSpec.uniform(0, 1, 6)
    z = np.array([[5.0, -1, 0, 0, 0, 0], [0.0, 0, 0, 0, 0, 0]])
    out = project_onto_G(z, g, 0.0, np.inf)
    assert np.allclose(out @ g.weights, 1.0, atol=1e-10)
    for method in ("bisection", "breakpoints"):
        assert np.allclose(project_onto_G(z, g, 0.0, np.inf, method=method), out, atol=1e-10)
    assert np.array_equal(out[1], project_onto_G(z[1], g, 0.0, np.inf))


def test_uniform_grid_layout():
    g = GridSpec.uniform(-4, 4, 40)
    assert g.points[0] == pytest.approx(-3.9) and g.points[-1] == pytest.approx(3.9)
    assert g.weights.sum() == pytest.approx(8.0)
    assert g.describe() == {"grid_lo": pytest.approx(-4.0), "grid_hi": pytest.approx(4.0), "grid_m": 40}
    with pytest.raises(ValueError):
        GridSpec(np.array([0.0, 0.0]), 1.0, 1.0)
    with pytest.raises(ValueError):
        GridSpec.uniform(1, 0, 5)


def test_uniform_start_and_ise():
    g = GridSpec.uniform(-2, 2, 8)
    est = uniform_start(g, 0.0, 1.0)
    assert np.allclose(est.values, 0.25)
    assert weighted_ise(est.values, est.values, g) == 0.0


def _instances(max_m=6):
    return st.integers(2, max_m).flatmap(
        lambda m: st.tuples(
            hnp.arrays(np.float64, m, elements=st.floats(-3, 4)),
            hnp.arrays(np.float64, m, elements=st.floats(0.05, 1.0)),
            hnp.arrays(np.float64, m, elements=st.floats(0.2, 3.0)),
        )
    )


def _setup(inst):
    z, w, h = inst
    w = w / w.sum()
    return z, GridSpec(np.arange(z.size, dtype=np.float64), w, h)


@settings(max_examples=200, deadline=None)
@given(inst=_instances(), method=st.sampled_from(["bisection", "breakpoints"]))
def test_projection_feasible_and_idempotent(inst, method):
    z, g = _setup(inst)
    y = project_onto_G(z, g, 0.0, 2.5, method=method)
    assert np.all(y >= 0.0) and np.all(y <= 2.5)
    assert abs(float(g.weights @ y) - 1.0) <= 1e-10
    assert np.allclose(project_onto_G(y, g, 0.0, 2.5, method=method), y, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(inst=_instances(), other=hnp.arrays(np.float64, 6, elements=st.floats(-3, 4)))
def test_projection_nonexpansive(inst, other):
    z, g = _setup(inst)
    v = other[: z.size]
    hw = g.aux * g.weights
    pu, pv = project_onto_G(z, g, 0.0, 2.5), project_onto_G(v, g, 0.0, 2.5)
    assert np.sum(hw * (pu - pv) ** 2) <= np.sum(hw * (z - v) ** 2) * (1 + 1e-12) + 1e-18


@settings(max_examples=100, deadline=None)
@given(inst=_instances())
def test_unnormalized_projection_is_clamp(inst):
    z, g = _setup(inst)
    assert np.array_equal(project_onto_G(z, g, 0.0, 1.0, normalized=False), np.clip(z, 0.0, 1.0))


@settings(max_examples=100, deadline=None)
@given(inst=_instances(4))
def test_methods_agree_with_oracle(inst):
    z, g = _setup(inst)
    ref = qp_projection_bruteforce(z, g.weights, g.aux, 0.0, 2.5)
    for method in ("bisection", "breakpoints"):
        assert np.allclose(project_onto_G(z, g, 0.0, 2.5, method=method), ref, atol=1e-9)
