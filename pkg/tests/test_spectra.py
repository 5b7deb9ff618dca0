import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import trapezoid
from scipy.linalg import eigh_tridiagonal

from lbl.korman import cached_alpha_star, cached_generator, korman_solution
from lbl.problem import exponential_spec, power_spec
from lbl.spectra import (SpectralAnomaly, branch_potential, constant_potential, eigenvalue,
                         eigenvalue_full, eigenvalues, identity_residual, identity_terms,
                         is_degenerate, morse_index, pruefer_angle, scan_branch)

# first sign change of mu_2 on the exponential l = 1 branch (this package,
# refined by brentq); mu values at the turning point and at that crossing
EXP1_ALPHA_1 = 4.316059890757792
EXP1_MU_AT_STAR = (0.0, 6.2970783536, 19.2922540648)
EXP1_MU_AT_ALPHA_1 = (-6.9056288, 0.0, 16.2039326)


def _fd_spectrum(pot, n=4000, k=3):
    """Lowest eigenvalues of -phi'' - q phi by second-order finite differences."""
    x = np.linspace(-1.0, 1.0, n + 1)[1:-1]
    h = 2.0 / n
    diag = 2.0 / h ** 2 - pot(np.abs(x))
    off = -np.ones(x.size - 1) / h ** 2
    return eigh_tridiagonal(diag, off, select="i", select_range=(0, k - 1),
                            eigvals_only=True)


@pytest.fixture(scope="module")
def exp1_setup():
    spec = exponential_spec(1.0)
    gen = cached_generator(spec)
    return spec, gen, cached_alpha_star(spec)


@given(c=st.floats(-5.0, 20.0))
def test_constant_potential_shift(c):
    pot = constant_potential(c)
    for k in (1, 2, 3):
        assert abs(eigenvalue(pot, k).mu - ((k * math.pi / 2) ** 2 - c)) < 1e-7


def test_free_angle_reaches_pi():
    pot = constant_potential(0.0)
    mu1 = (math.pi / 2) ** 2
    assert abs(pruefer_angle(pot, mu1, "even") - math.pi) < 1e-9
    assert abs(pruefer_angle(pot, 4 * mu1, "odd") - math.pi) < 1e-9


def test_parity_and_full_agree():
    pot = constant_potential(2.5)
    for k in (1, 2, 3, 4):
        assert abs(eigenvalue(pot, k).mu - eigenvalue_full(pot, k)) < 1e-7


@pytest.mark.parametrize("parity", ["even", "odd"])
def test_angle_increases_with_mu(exp1_setup, parity):
    spec, gen, _ = exp1_setup
    pot = branch_potential(spec, gen, 5.0)
    mus = np.linspace(-10.0, 30.0, 9)
    angles = [pruefer_angle(pot, m, parity) for m in mus]
    assert np.all(np.diff(angles) > 0)
    _, dth = pruefer_angle(pot, 1.0, parity, with_derivative=True)
    assert dth > 0


@pytest.mark.parametrize("alpha", [0.5, 3.0, 12.0])
def test_matches_finite_difference_spectrum(exp1_setup, alpha):
    spec, gen, _ = exp1_setup
    pot = branch_potential(spec, gen, alpha)
    fd = _fd_spectrum(pot)
    ours = [e.mu for e in eigenvalues(pot, 3)]
    scale = 1.0 + pot.q_max
    assert np.allclose(ours, fd, rtol=0, atol=2e-4 * scale)


@pytest.mark.parametrize("alpha", [0.6, 4.0, 20.0])
def test_eigenfunction_structure(exp1_setup, alpha):
    spec, gen, _ = exp1_setup
    res = eigenvalues(branch_potential(spec, gen, alpha), 3)
    assert res[0].mu < res[1].mu < res[2].mu
    for k, r in enumerate(res, start=1):
        assert r.zeros == k - 1
        mirrored = r.phi[::-1]
        sign = 1.0 if k % 2 == 1 else -1.0
        assert np.allclose(mirrored, sign * r.phi, atol=1e-12)
    # discrete orthogonality on the sample grid
    x = res[0].x
    for a in range(3):
        for b in range(a + 1, 3):
            assert abs(trapezoid(res[a].phi * res[b].phi, x)) < 1e-4


def test_frozen_spectrum_at_turning_point(exp1_setup):
    spec, gen, a_star = exp1_setup
    mus = [e.mu for e in eigenvalues(branch_potential(spec, gen, a_star), 3)]
    assert abs(mus[0]) < 1e-8
    assert abs(mus[1] - EXP1_MU_AT_STAR[1]) < 1e-8
    assert abs(mus[2] - EXP1_MU_AT_STAR[2]) < 1e-8


def test_frozen_second_crossing(exp1_setup):
    spec, gen, _ = exp1_setup
    mus = [e.mu for e in eigenvalues(branch_potential(spec, gen, EXP1_ALPHA_1), 3)]
    assert abs(mus[1]) < 1e-8
    assert abs(mus[0] - EXP1_MU_AT_ALPHA_1[0]) < 1e-6
    assert abs(mus[2] - EXP1_MU_AT_ALPHA_1[2]) < 1e-6


def test_morse_index_pattern(exp1_setup):
    spec, gen, a_star = exp1_setup
    m = lambda a: morse_index(branch_potential(spec, gen, a))
    assert m(0.5 * a_star) == 0
    assert m(0.5 * (a_star + EXP1_ALPHA_1)) == 1
    assert m(30.0) == 2
    # the zero eigenvalue at the turning point is not counted
    assert m(a_star) == 0


def test_degeneracy_threshold():
    assert is_degenerate(1e-7, 10.0)
    assert not is_degenerate(-1e-3, 10.0)


def test_morse_index_rejects_nonpositive_third_eigenvalue():
    with pytest.raises(SpectralAnomaly):
        morse_index(constant_potential(0.0), mus=[-3.0, -2.0, -1.0])


def test_scan_locates_crossings(exp1_setup):
    spec, gen, a_star = exp1_setup
    scan = scan_branch(spec, gen, np.geomspace(0.1, 30.0, 40))
    assert len(scan.mu1_crossings) == 1
    assert abs(scan.mu1_crossings[0] - a_star) < 1e-8
    assert abs(scan.alpha_1 - EXP1_ALPHA_1) < 1e-8
    assert scan.alpha_1 == scan.alpha_3
    assert scan.found and not scan.note


def test_scan_reports_missing_crossing():
    spec = power_spec(2.0, 1.0)
    scan = scan_branch(spec, cached_generator(spec), np.geomspace(0.05, 20.0, 25))
    assert not scan.found
    assert "no mu_2 sign change" in scan.note


def test_scan_rejects_unsorted_grid(exp1_setup):
    spec, gen, _ = exp1_setup
    with pytest.raises(ValueError):
        scan_branch(spec, gen, [1.0, 0.5])


@pytest.mark.parametrize("alpha", [None, 10.0, 20.0])
def test_identity_holds_for_second_mode(exp1_setup, alpha):
    spec, gen, a_star = exp1_setup
    alpha = a_star if alpha is None else alpha
    sol = korman_solution(spec, gen, alpha)
    eig2 = eigenvalue(branch_potential(spec, gen, alpha), 2)
    T1, T2 = identity_terms(spec, sol, eig2)
    assert abs(T1) > 1e-3
    assert identity_residual(spec, sol, eig2, relative=True) <= 1e-5


def test_identity_fails_for_wrong_mode(exp1_setup):
    spec, gen, _ = exp1_setup
    sol = korman_solution(spec, gen, 10.0)
    pot = branch_potential(spec, gen, 10.0)
    eig2 = eigenvalue(pot, 2)
    # perturbing the eigenvalue must break the identity
    wrong = replace(eig2, mu=eig2.mu + 1.0)
    assert identity_residual(spec, sol, wrong, relative=True) > 1e-3
    with pytest.raises(ValueError):
        identity_terms(spec, sol, eigenvalue(pot, 1))
