import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from drift_kde.rng import RngState, normals, raw_words, stream, uniforms


def test_same_state_same_words():
    a, _ = uniforms(stream(7, 3), 10)
    b, _ = uniforms(stream(7, 3), 10)
    assert np.array_equal(a, b)


def test_replica_streams_differ():
    a, _ = uniforms(stream(7, 0), 8)
    b, _ = uniforms(stream(7, 1), 8)
    assert not np.array_equal(a, b)
    assert stream(7, 1).key == 6


@settings(max_examples=50, deadline=None)
@given(n1=st.integers(0, 40), n2=st.integers(0, 40))
def test_split_draws_match_one_draw_in_whole_blocks(n1, n2):
    # whole blocks are consumed, so splitting at block boundaries is seamless
    n1 = 4 * n1
    s = stream(11)
    first, s1 = uniforms(s, n1)
    second, _ = uniforms(s1, n2)
    whole, _ = uniforms(s, n1 + n2)
    assert np.array_equal(np.concatenate([first, second]), whole)


def test_uniform_range_and_ks():
    u, _ = uniforms(stream(1), 20_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert stats.kstest(u, "uniform").pvalue > 1e-3


def test_normals_ks():
    z, _ = normals(stream(2), 20_000)
    assert stats.kstest(z, "norm").pvalue > 1e-3


def test_state_validation():
    with pytest.raises(ValueError):
        RngState(-1)
    with pytest.raises(ValueError):
        RngState(1, -1)
    with pytest.raises(ValueError):
        raw_words(stream(0), -1)


def test_state_advances_by_blocks():
    _, s = uniforms(stream(0), 5)
    assert s.block == 2
