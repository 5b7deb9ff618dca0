import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numba import njit

from lbl.ode_core import IntegrationError, evaluate, first_root, integrate


@njit
def harmonic(x, y, prm):
    return np.array([y[1], -y[0]])


@njit
def riccati(x, y, prm):
    return np.array([y[0] * y[0]])


@njit
def kinked(x, y, prm):
    return np.array([abs(x)])


@pytest.fixture(scope="module")
def sine():
    return integrate(harmonic, 0.0, [0.0, 1.0], 4.0)


def test_reaches_end_and_keeps_nodes(sine):
    assert sine.t_start == 0.0 and sine.t_end == 4.0
    assert np.all(np.diff(sine.xs) > 0)
    y, dy = evaluate(sine, sine.xs)
    assert np.array_equal(y, sine.ys)
    assert np.array_equal(dy, sine.dys)


def test_arrays_are_read_only(sine):
    with pytest.raises(ValueError):
        sine.ys[0, 0] = 1.0


def test_peak_value(sine):
    assert abs(sine(math.pi / 2)[0] - 1.0) < 1e-10


@given(st.floats(0.0, 4.0))
def test_interpolant_matches_sine(x):
    traj = integrate(harmonic, 0.0, [0.0, 1.0], 4.0)
    y, dy = evaluate(traj, x)
    assert abs(y[0] - math.sin(x)) < 1e-9
    assert abs(y[1] - math.cos(x)) < 1e-9
    # derivative of the interpolant is consistent with the field
    assert abs(dy[0] - y[1]) < 1e-8


def test_interpolant_is_c1_at_nodes(sine):
    i = len(sine.xs) // 2
    x = sine.xs[i]
    eps = 1e-9
    left = evaluate(sine, x - eps)[1]
    right = evaluate(sine, x + eps)[1]
    assert np.allclose(left, right, atol=1e-7)


@pytest.mark.parametrize("rtol", [1e-6, 1e-8, 1e-10, 1e-12])
def test_error_tracks_tolerance(rtol):
    traj = integrate(harmonic, 0.0, [0.0, 1.0], 4.0, tol=(rtol, rtol * 1e-2))
    x = np.linspace(0.0, 4.0, 401)
    err = np.max(np.abs(traj(x)[:, 0] - np.sin(x)))
    assert err < 10 * rtol


def test_first_root_at_pi(sine):
    ev = first_root(sine, 0, window=(1.0, 4.0))
    assert abs(ev.location - math.pi) < 1e-11
    assert abs(ev.slope + 1.0) < 1e-9


def test_first_root_with_callable_event(sine):
    ev = first_root(sine, lambda x, y: y[1], window=(0.1, 4.0))
    assert abs(ev.location - math.pi / 2) < 1e-10


def test_first_root_level(sine):
    ev = first_root(sine, 0, level=0.5)
    assert abs(ev.location - math.pi / 6) < 1e-10


def test_no_root_in_window(sine):
    assert first_root(sine, 0, window=(0.5, 2.5)) is None


def test_terminal_stop():
    traj = integrate(harmonic, 0.0, [0.0, 1.0], 10.0, stop_index=0, stop_level=-0.5)
    assert traj.ys[-1, 0] < -0.5 <= traj.ys[-2, 0]
    ev = first_root(traj, 0, window=(traj.xs[-2], traj.xs[-1]), level=-0.5)
    assert abs(ev.location - (math.pi + math.pi / 6)) < 1e-10


def test_breakpoints_become_nodes():
    traj = integrate(kinked, -1.0, [0.0], 1.0, breakpoints=(0.0,))
    assert 0.0 in traj.xs
    x = np.linspace(-1.0, 1.0, 101)
    exact = np.where(x < 0, (1.0 - x * x) / 2, 0.5 + x * x / 2)
    assert np.max(np.abs(traj(x)[:, 0] - exact)) < 1e-12


def test_blow_up_is_reported():
    # y' = y^2, y(0) = 1 explodes at x = 1
    with pytest.raises(IntegrationError) as info:
        integrate(riccati, 0.0, [1.0], 2.0)
    assert info.value.x_reached < 1.0 + 1e-6


def test_evaluate_rejects_outside(sine):
    with pytest.raises(ValueError):
        evaluate(sine, 4.5)


def test_plain_python_field_is_compiled():
    def decay(x, y, prm):
        return -prm[0] * y

    traj = integrate(decay, 0.0, [1.0], 1.0, prm=np.array([2.0]))
    assert abs(traj.ys[-1, 0] - math.exp(-2.0)) < 1e-10


def test_bad_interval():
    with pytest.raises(ValueError):
        integrate(harmonic, 1.0, [0.0, 1.0], 0.0)
