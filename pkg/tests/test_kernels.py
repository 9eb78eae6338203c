import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from drift_kde.kernels import (
    DimensionError,
    KernelSpec,
    evaluate,
    scaled_evaluate,
    scaled_values,
    tail_condition_holds,
    width_characteristic,
)

FAMILIES = ("box", "epanechnikov", "gaussian")


def test_evaluate_examples():
    assert evaluate(KernelSpec("uniform-box"), 0.0) == 1.0
    assert evaluate(KernelSpec("gaussian"), 0.0) == pytest.approx(0.3989422804, abs=1e-10)
    assert evaluate(KernelSpec("epanechnikov"), 0.5) == pytest.approx(0.5625, abs=1e-15)


def test_evaluate_outside_support_and_dimension_check():
    assert evaluate(KernelSpec("box"), 0.6) == 0.0
    assert evaluate(KernelSpec("epanechnikov"), -1.5) == 0.0
    with pytest.raises(DimensionError):
        evaluate(KernelSpec("gaussian", 2), [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        evaluate(KernelSpec("gaussian"), math.nan)


def test_scaled_evaluate_examples():
    assert scaled_evaluate(KernelSpec("box"), 0.0, 0.0, 0.5) == 2.0
    assert scaled_evaluate(KernelSpec("gaussian"), 1.0, 1.0, 2.0) == pytest.approx(0.1994711402, abs=1e-10)
    assert scaled_evaluate(KernelSpec("epanechnikov"), 2.0, 0.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        scaled_evaluate(KernelSpec("box"), 0.0, 0.0, 0.0)


def test_width_characteristic_examples():
    assert width_characteristic(KernelSpec("box"), 1.0) == pytest.approx(0.25, abs=1e-15)
    assert width_characteristic(KernelSpec("epanechnikov"), 1.0) == pytest.approx(0.375, abs=1e-15)
    assert width_characteristic(KernelSpec("gaussian"), 1.0) == pytest.approx(math.sqrt(2 / math.pi), abs=1e-12)
    with pytest.raises(ValueError):
        width_characteristic(KernelSpec("box"), 0.0)
    with pytest.raises(ValueError):
        width_characteristic(KernelSpec("box"), 1.5)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("nu", [0.25, 0.5, 1.0])
def test_width_characteristic_matches_quadrature_oracle(family, nu):
    k = KernelSpec(family)
    lo, hi = k.support_box()
    val, _ = integrate.quad(lambda y: abs(y) ** nu * float(k(np.array([y]))[0]), lo, hi, points=[0.0], epsabs=1e-12)
    assert width_characteristic(k, nu) == pytest.approx(val, abs=1e-8)


@pytest.mark.parametrize("family", FAMILIES)
def test_width_characteristic_two_dim_matches_quadrature(family):
    k = KernelSpec(family, 2)
    lo, hi = k.support_box()
    val, _ = integrate.dblquad(
        lambda y, x: math.hypot(x, y) ** 0.5 * float(k(np.array([[x, y]]))[0]), lo, hi, lo, hi, epsabs=1e-10
    )
    assert width_characteristic(k, 0.5) == pytest.approx(val, abs=1e-6)


@pytest.mark.parametrize("family", FAMILIES)
def test_unit_mass_one_dim(family):
    k = KernelSpec(family)
    lo, hi = k.support_box()
    val, _ = integrate.quad(lambda u: float(k(np.array([u]))[0]), lo, hi, epsabs=1e-12)
    assert val == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("family", FAMILIES)
def test_unit_mass_two_dim(family):
    k = KernelSpec(family, 2)
    lo, hi = k.support_box()
    val, _ = integrate.dblquad(lambda y, x: float(k(np.array([[x, y]]))[0]), lo, hi, lo, hi, epsabs=1e-10)
    assert val == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("theta", [0.1, 1.0, 10.0])
def test_scaled_kernel_integrates_to_one(family, theta):
    k = KernelSpec(family)
    lo, hi = k.support_box()
    x = 0.3
    val, _ = integrate.quad(
        lambda xb: scaled_evaluate(k, xb, x, theta), x + theta * lo, x + theta * hi, points=[x], epsabs=1e-12
    )
    assert val == pytest.approx(1.0, abs=1e-5)


def test_width_monotone_in_nu_for_unit_support():
    k = KernelSpec("epanechnikov")
    vals = [width_characteristic(k, nu) for nu in (0.25, 0.5, 0.75, 1.0)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("family", FAMILIES)
@pytest.mark.parametrize("dim", [1, 2])
def test_tail_condition(family, dim):
    assert tail_condition_holds(KernelSpec(family, dim))


def test_aliases_and_unknown_family():
    assert KernelSpec("uniform").family == "box"
    assert KernelSpec("epanechnikov-product").family == "epanechnikov"
    with pytest.raises(ValueError):
        KernelSpec("triweight")
    with pytest.raises(ValueError):
        KernelSpec("box", 0)


def test_scaled_values_broadcast_matches_pointwise():
    k = KernelSpec("epanechnikov")
    xb = np.array([-0.4, 0.0, 0.9])
    vals = scaled_values(k, xb, 0.1, 0.7)
    assert np.allclose(vals, [scaled_evaluate(k, v, 0.1, 0.7) for v in xb], rtol=0, atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(
    family=st.sampled_from(FAMILIES),
    dim=st.integers(1, 3),
    u=st.lists(st.floats(-20, 20), min_size=3, max_size=3),
)
def test_kernel_nonnegative_and_below_sup(family, dim, u):
    k = KernelSpec(family, dim)
    v = float(k(np.array(u[:dim]).reshape(1, dim))[0])
    assert 0.0 <= v <= k.sup_bound
