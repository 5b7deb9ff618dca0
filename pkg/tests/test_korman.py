import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq, minimize_scalar

from lbl.korman import (DepthError, alpha_on_lower_branch, alpha_on_upper_branch,
                        cached_alpha_star, cached_generator, dlambda_dalpha, eta,
                        korman_solution, lambda_of_alpha, psi)
from lbl.problem import exponential_spec, power_spec

# Reference values computed once with this package at default tolerances and
# cross-checked against an independent maximization of lambda(alpha).
EXP1_ALPHA_STAR = 1.251473063966048
EXP1_LAMBDA_STAR = 2.762575699169621
POW7_ALPHA_STAR = 0.21041793260050506
POW7_LAMBDA_STAR = 0.427393358953002


@pytest.fixture(scope="module")
def exp0():
    spec = exponential_spec(0.0)
    return spec, cached_generator(spec)


def _eta_l0(t):
    return math.sqrt(2.0) * math.acosh(math.exp(0.5 * t))


def _count_sign_changes(v):
    s = np.sign(v)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


@given(st.floats(0.05, 12.0))
def test_eta_l0_closed_form(exp0, t):
    spec, gen = exp0
    assert abs(eta(gen, t) - _eta_l0(t)) < 1e-9 * max(1.0, _eta_l0(t))


def test_lambda_l0_at_one(exp0):
    spec, gen = exp0
    exact = 2.0 * math.acosh(math.exp(0.5)) ** 2 * math.exp(-1.0)
    assert abs(lambda_of_alpha(spec, gen, 1.0) - exact) < 1e-10
    assert abs(exact - 0.8662152234) < 1e-10


def test_alpha_star_l0_matches_closed_form(exp0):
    spec, gen = exp0
    lam = lambda a: 2.0 * math.acosh(math.exp(0.5 * a)) ** 2 * math.exp(-a)
    res = minimize_scalar(lambda a: -lam(a), bounds=(0.1, 5.0), method="bounded",
                          options={"xatol": 1e-12})
    a_star = cached_alpha_star(spec)
    # the maximizer is flat, so compare the value tightly and the location loosely
    assert abs(lambda_of_alpha(spec, gen, a_star) + res.fun) < 1e-10
    assert abs(a_star - res.x) < 1e-5


@pytest.mark.parametrize("spec, alpha_ref, lam_ref", [
    (exponential_spec(1.0), EXP1_ALPHA_STAR, EXP1_LAMBDA_STAR),
    (power_spec(7.0, 1.0), POW7_ALPHA_STAR, POW7_LAMBDA_STAR),
])
def test_turning_point_frozen(spec, alpha_ref, lam_ref):
    gen = cached_generator(spec)
    a_star = cached_alpha_star(spec)
    assert abs(a_star - alpha_ref) < 1e-9
    assert abs(lambda_of_alpha(spec, gen, a_star) - lam_ref) < 1e-11


@pytest.mark.parametrize("spec", [exponential_spec(1.0), exponential_spec(2.0),
                                  power_spec(7.0, 1.0)])
def test_turning_point_is_maximum(spec):
    gen = cached_generator(spec)
    a_star = cached_alpha_star(spec)
    lam = lambda a: lambda_of_alpha(spec, gen, a)
    res = minimize_scalar(lambda a: -lam(a), bounds=(0.3 * a_star, 3 * a_star),
                          method="bounded", options={"xatol": 1e-12})
    assert abs(lam(a_star) + res.fun) < 1e-12
    assert abs(dlambda_dalpha(spec, gen, a_star)) < 1e-8


@pytest.mark.parametrize("spec", [exponential_spec(1.0), power_spec(7.0, 1.0)])
@given(alpha=st.floats(0.05, 12.0))
def test_dlambda_matches_finite_difference(spec, alpha):
    gen = cached_generator(spec)
    h = 1e-5 * max(1.0, alpha)
    fd = (lambda_of_alpha(spec, gen, alpha + h) - lambda_of_alpha(spec, gen, alpha - h)) / (2 * h)
    exact = dlambda_dalpha(spec, gen, alpha)
    scale = max(abs(exact), lambda_of_alpha(spec, gen, alpha) / alpha)
    assert abs(fd - exact) <= 1e-5 * scale


@pytest.mark.parametrize("spec", [exponential_spec(1.0), power_spec(7.0, 1.0)])
@given(t=st.floats(1e-3, 0.999))
def test_eta_inverts_w(spec, t):
    gen = cached_generator(spec)
    depth = t * 15.0 if not spec.is_power else t
    s = eta(gen, depth)
    assert abs(-float(gen.w(s)[0]) - depth) < 1e-10 * max(1.0, depth)


@pytest.mark.parametrize("spec", [exponential_spec(1.0), power_spec(7.0, 1.0)])
@given(alpha=st.floats(0.05, 20.0))
def test_even_solution_boundary_values(spec, alpha):
    sol = korman_solution(spec, cached_generator(spec), alpha, n_samples=65)
    assert abs(float(sol.U(0.0)) - alpha) < 1e-12 * max(1.0, alpha)
    assert abs(float(sol.U(1.0))) < 1e-9 * max(1.0, alpha)
    assert abs(float(sol.U(-1.0))) < 1e-9 * max(1.0, alpha)
    assert np.allclose(sol.U(sol.x), sol.U(-sol.x), rtol=0, atol=1e-14)


def test_even_solution_residual():
    spec = exponential_spec(1.0)
    sol = korman_solution(spec, cached_generator(spec), 5.0)
    assert sol.residual() < 1e-7
    assert sol.beta > 0


def test_psi_zero_pattern():
    spec = exponential_spec(1.0)
    gen = cached_generator(spec)
    a_star = cached_alpha_star(spec)
    x = np.linspace(-1.0, 1.0, 2001)
    low = psi(spec, korman_solution(spec, gen, 0.5 * a_star), x)
    assert np.all(low > 0)
    top = psi(spec, korman_solution(spec, gen, a_star), np.array([-1.0, 1.0]))
    assert np.max(np.abs(top)) < 1e-8
    for alpha in (2 * a_star, 10.0):
        v = psi(spec, korman_solution(spec, gen, alpha), x)
        assert _count_sign_changes(v) == 2
        assert v[0] < 0 and v[-1] < 0 and v[1000] > 0


def test_turning_point_from_sign_function():
    # independent route: root of s w'(s) + l + 2 located by brentq on a grid
    spec = exponential_spec(1.0)
    gen = cached_generator(spec)
    s = np.linspace(0.1, 5.0, 50)
    W = gen.W(s)
    j = int(np.nonzero(W < 0)[0][0])
    root = brentq(lambda v: float(gen.W(v)), s[j - 1], s[j], xtol=1e-15)
    assert abs(-float(gen.w(root)[0]) - cached_alpha_star(spec)) < 1e-10


def test_branch_inversion():
    spec = exponential_spec(1.0)
    gen = cached_generator(spec)
    a_star = cached_alpha_star(spec)
    lam = 0.5 * lambda_of_alpha(spec, gen, a_star)
    lo = alpha_on_lower_branch(spec, gen, lam, a_star)
    hi = alpha_on_upper_branch(spec, gen, lam, a_star)
    assert lo < a_star < hi
    for a in (lo, hi):
        assert abs(lambda_of_alpha(spec, gen, a) - lam) < 1e-13
    assert alpha_on_upper_branch(spec, gen, 1.5 * lam * 2, a_star) is None


def test_lambda_vanishes_in_both_tails():
    spec = exponential_spec(1.0)
    gen = cached_generator(spec)
    small = [lambda_of_alpha(spec, gen, a) for a in (1e-2, 1e-3, 1e-4)]
    large = [lambda_of_alpha(spec, gen, a) for a in (10.0, 20.0, 30.0)]
    assert small[0] > small[1] > small[2] and small[2] < 1e-3
    assert large[0] > large[1] > large[2] and large[2] < 1e-9


def test_power_depth_must_stay_below_one():
    spec = power_spec(7.0, 1.0)
    with pytest.raises(DepthError):
        eta(cached_generator(spec), 1.0)


def test_nonpositive_alpha_rejected():
    spec = exponential_spec(1.0)
    with pytest.raises(ValueError):
        lambda_of_alpha(spec, cached_generator(spec), 0.0)
