import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hbfp.rounding import NEAREST_EVEN, RoundingMode, round_array, round_tiled, round_value
from hbfp.xorshift import XorshiftState, xorshift_next


@pytest.mark.parametrize("mode", [NEAREST_EVEN, RoundingMode.stochastic(77)])
def test_integers_round_to_themselves(mode):
    for x in (3.0, -2.0, 0.0):
        assert round_value(x, mode)[0] == x
    np.testing.assert_array_equal(round_array(np.arange(-5.0, 6.0), mode), np.arange(-5.0, 6.0))


def test_half_to_even():
    assert round_value(2.5, NEAREST_EVEN)[0] == 2
    assert round_value(3.5, NEAREST_EVEN)[0] == 4
    assert round_value(-2.5, NEAREST_EVEN)[0] == -2


def test_stochastic_result_is_floor_or_ceil():
    mode = RoundingMode.stochastic(5)
    x = np.linspace(-3, 3, 1001)
    r = round_array(x, mode)
    assert np.all((r == np.floor(x)) | (r == np.ceil(x)))


def test_stochastic_quarter_mean():
    n = 10**5
    r = round_array(np.full(n, 0.25), RoundingMode.stochastic(2024))
    bound = 4 * math.sqrt(0.25 * 0.75 / n)
    assert abs(r.mean() - 0.25) <= bound


def test_vector_rounding_matches_scalar_state_threading():
    mode = RoundingMode.stochastic(31337)
    x = np.random.default_rng(0).uniform(-10, 10, 300)
    vec = round_array(x, mode)
    state = XorshiftState(mode.seed)
    for i, xi in enumerate(x):
        r, state = round_value(xi, mode, state)
        assert r == vec[i]


def test_stochastic_consumes_one_draw_per_element():
    mode = RoundingMode.stochastic(8)
    state = XorshiftState(8)
    for _ in range(5):
        _, state = round_value(0.5, mode, state)
    # five draws later the stream is where five xorshift steps put it
    y = XorshiftState(8)
    for _ in range(5):
        y, _ = xorshift_next(y)
    assert state == y


def test_tiled_streams_differ_from_single_stream():
    mode = RoundingMode.stochastic(3)
    x = np.full((4, 4), 0.5)
    a = round_tiled(x, mode, (2, 2))
    b = round_tiled(x, mode, (2, 2))
    np.testing.assert_array_equal(a, b)
    # one tile covering everything uses stream fork(0, 0)
    whole = round_tiled(x, mode, (4, 4))
    np.testing.assert_array_equal(whole, round_array(x, mode.fork(0, 0)))


def test_fork_is_identity_for_nearest():
    assert NEAREST_EVEN.fork(1, 2) is NEAREST_EVEN
    s = RoundingMode.stochastic(1)
    assert s.fork(1) != s.fork(2)
    assert s.fork(1) == s.fork(1)


def test_bad_modes():
    with pytest.raises(ValueError):
        RoundingMode("truncate")
    with pytest.raises(ValueError):
        RoundingMode.stochastic(0)


@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_nearest_matches_python_round(x):
    assert round_value(x, NEAREST_EVEN)[0] == round(x)
