import numpy as np
import pytest
from hypothesis import given, strategies as st

from lbl.korman import (alpha_on_upper_branch, cached_alpha_star, cached_generator,
                        korman_solution, lambda_of_alpha)
from lbl.ode_core import evaluate
from lbl.problem import exponential_spec
from lbl.shooting import (existence_bound_holds, even_betas, find_solutions,
                          noneven_near_even, shoot, solution_from_beta, z_prime)

# second crossing on the exponential l = 1 branch and the merge bracket in
# lambda found by bisection (this package, default tolerances)
EXP1_ALPHA_3 = 4.316059890757792
EXP1_MERGE_BRACKET = (0.80350054, 0.80354763)


@pytest.fixture(scope="module")
def setup():
    spec = exponential_spec(1.0)
    gen = cached_generator(spec)
    a_star = cached_alpha_star(spec)
    return spec, gen, a_star, lambda_of_alpha(spec, gen, a_star), lambda_of_alpha(spec, gen, EXP1_ALPHA_3)


@pytest.fixture(scope="module")
def half_lam3(setup):
    spec, _, _, _, lam3 = setup
    return find_solutions(spec, 0.5 * lam3)


def _sign_changes(v):
    s = np.sign(v)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def test_korman_slope_hits_right_end(setup):
    spec, gen, *_ = setup
    sol = korman_solution(spec, gen, 5.0)
    res = shoot(spec, sol.lam, sol.beta)
    assert abs(res.z - 1.0) < 1e-10
    assert res.slope_at_zero < 0


def test_large_slope_lands_short(setup):
    spec, gen, *_ = setup
    lam = lambda_of_alpha(spec, gen, 5.0)
    assert shoot(spec, lam, 1e6).z < 1.0


def test_even_solution_shape(setup):
    spec, gen, *_ = setup
    sol = korman_solution(spec, gen, 5.0)
    s = solution_from_beta(spec, sol.lam, sol.beta)
    assert s.is_even and s.residual < 1e-6
    # concave, and at least a quarter of its peak on the middle half
    assert np.all(np.diff(s.du) <= 1e-12)
    mid = np.abs(s.x) <= 0.5
    assert np.all(s.u[mid] >= 0.25 * s.sup_norm)
    assert abs(s.sup_norm - 5.0) < 1e-8


@given(alpha=st.floats(0.3, 12.0), factor=st.floats(0.7, 1.3))
def test_z_prime_matches_finite_difference(setup, alpha, factor):
    spec, gen, *_ = setup
    sol = korman_solution(spec, gen, alpha, n_samples=3)
    lam, beta = sol.lam, sol.beta * factor
    h = 1e-6 * beta
    zp = shoot(spec, lam, beta + h).z, shoot(spec, lam, beta - h).z
    fd = (zp[0] - zp[1]) / (2 * h)
    exact = z_prime(spec, lam, beta)
    assert abs(fd - exact) <= 1e-5 * max(abs(exact), 1e-3)


@pytest.mark.parametrize("frac", [0.5, 0.9])
def test_variation_on_upper_branch(setup, frac):
    spec, gen, a_star, _, lam3 = setup
    lam = frac * lam3
    a_up = alpha_on_upper_branch(spec, gen, lam, a_star)
    res = shoot(spec, lam, korman_solution(spec, gen, a_up, n_samples=3).beta)
    assert res.z_prime > 0
    x = np.linspace(-1.0, 1.0, 2001)
    v = evaluate(res.traj, x)[0][:, 2]
    assert _sign_changes(v[1:-1]) == 2
    assert v[-1] > 0


def test_two_even_solutions_below_turning_point(setup):
    spec, gen, _, lam_star, _ = setup
    lam = 0.99 * lam_star
    sols = find_solutions(spec, lam)
    assert len(sols) == 2 and all(s.is_even for s in sols)
    pred = even_betas(spec, lam)
    for s, b in zip(sols, pred):
        assert abs(s.beta - b) <= 1e-6 * b


def test_none_above_turning_point(setup):
    spec, _, _, lam_star, _ = setup
    assert find_solutions(spec, 1.5 * lam_star) == []


def test_four_roots_below_second_crossing(setup, half_lam3):
    spec, _, _, _, lam3 = setup
    sols = half_lam3
    assert len(sols) == 4
    assert sum(s.is_even for s in sols) == 2
    dense = find_solutions(spec, 0.5 * lam3, n_points=4000)
    assert len(dense) == len(sols)
    for a, b in zip(sols, dense):
        assert abs(a.beta - b.beta) <= 1e-9 * a.beta


def test_even_roots_match_closed_form(setup, half_lam3):
    spec, _, _, _, lam3 = setup
    even = [s.beta for s in half_lam3 if s.is_even]
    for got, want in zip(even, even_betas(spec, 0.5 * lam3)):
        assert abs(got - want) <= 1e-6 * want


def test_mirror_pair_closes(half_lam3):
    pair = [s for s in half_lam3 if not s.is_even]
    assert len(pair) == 2 and pair[0].pair == pair[1].pair == 0
    a, b = pair
    assert abs(a.mirror_beta - b.beta) <= 1e-6 * b.beta
    assert np.max(np.abs(a.u - b.u[::-1])) <= 1e-6 * a.sup_norm
    assert a.asymmetry > 1e-3
    assert a.residual < 1e-6 and b.residual < 1e-6
    assert abs(a.sup_norm - b.sup_norm) <= 1e-8 * a.sup_norm


def test_existence_bound(setup, half_lam3):
    spec = setup[0]
    for s in half_lam3:
        if not s.is_even:
            assert existence_bound_holds(spec, s) == (True, True)


def test_merge_predicate_flips_across_bracket(setup):
    spec = setup[0]
    lo, hi = EXP1_MERGE_BRACKET
    assert noneven_near_even(spec, lo * (1 - 1e-4)) is not None
    assert noneven_near_even(spec, hi * (1 + 1e-4)) is None


def test_rejects_bad_arguments(setup):
    spec = setup[0]
    with pytest.raises(ValueError):
        shoot(spec, 1.0, -1.0)
    with pytest.raises(ValueError):
        shoot(spec, 1.0, 1.0, window_end=0.5)
    with pytest.raises(ValueError):
        find_solutions(spec, 0.0)
