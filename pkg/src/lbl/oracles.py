"""Closed-form self-tests of the numerical core.

Each check compares library output against a formula that does not share
code with the solver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List

import numpy as np
from scipy.optimize import minimize_scalar

from .korman import cached_alpha_star, cached_generator, generate, lambda_of_alpha
from .problem import exponential_spec, power_spec
from .spectra import constant_potential, eigenvalue, eigenvalue_full

# classical critical value of u'' + lam e^u = 0 on (0, 1), rescaled to (-1, 1)
BRATU_CRITICAL_UNIT = 3.513830719
LAMBDA_STAR_L0 = 0.8784577


@dataclass(frozen=True)
class OracleCheck:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tolerance)

    def to_dict(self) -> dict:
        return {"name": self.name, "error": self.error, "tolerance": self.tolerance,
                "passed": self.passed}


def exp_generator_l0(x_max: float = 5.0, n: int = 2001) -> float:
    """Max deviation of ``w`` from ``-2 ln cosh(x / sqrt 2)`` on ``[0, x_max]``."""
    gen = generate(exponential_spec(0.0))
    x = np.linspace(0.0, x_max, n)
    w, _ = gen.w(x)
    exact = -2.0 * np.log(np.cosh(x / math.sqrt(2.0)))
    return float(np.max(np.abs(w - exact)))


def power_energy_l0(p: float = 7.0, w_stop: float = -0.999) -> float:
    """Drift of ``w'^2/2 + (w + 1)^(p+1)/(p+1)`` along the generator nodes."""
    gen = generate(power_spec(p, 0.0))
    ys = gen.traj.ys
    keep = ys[:, 0] >= w_stop
    w, dw = ys[keep, 0], ys[keep, 1]
    energy = 0.5 * dw ** 2 + (w + 1.0) ** (p + 1.0) / (p + 1.0)
    return float(np.max(np.abs(energy - 1.0 / (p + 1.0))))


def lambda_star_closed_form_l0() -> tuple:
    """Maximum of ``2 arccosh(e^(a/2))^2 e^(-a)`` and its maximizer."""
    lam = lambda a: 2.0 * math.acosh(math.exp(0.5 * a)) ** 2 * math.exp(-a)
    res = minimize_scalar(lambda a: -lam(a), bounds=(0.1, 5.0), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.x), float(-res.fun)


def lambda_star_l0() -> float:
    """Library turning-point value for ``l = 0``."""
    spec = exponential_spec(0.0)
    return lambda_of_alpha(spec, cached_generator(spec), cached_alpha_star(spec))


def free_eigenvalues(kmax: int = 3) -> tuple:
    """Largest deviations from ``(k pi / 2)^2`` for q = 0, and between the
    parity-reduced and full-interval eigenvalues."""
    pot = constant_potential(0.0)
    err, split = 0.0, 0.0
    for k in range(1, kmax + 1):
        mu = eigenvalue(pot, k).mu
        err = max(err, abs(mu - (k * math.pi / 2.0) ** 2))
        split = max(split, abs(mu - eigenvalue_full(pot, k)))
    return err, split


def run_all() -> List[OracleCheck]:
    a_ref, lam_ref = lambda_star_closed_form_l0()
    lam_lib = lambda_star_l0()
    eig_err, split = free_eigenvalues()
    return [
        OracleCheck("exp_generator_l0", exp_generator_l0(), 1e-8),
        OracleCheck("power_energy_l0", power_energy_l0(), 1e-9),
        OracleCheck("lambda_star_l0_vs_constant", abs(lam_lib - LAMBDA_STAR_L0), 1e-5),
        OracleCheck("lambda_star_l0_vs_closed_form", abs(lam_lib - lam_ref), 1e-9),
        OracleCheck("bratu_critical_rescaled", abs(BRATU_CRITICAL_UNIT / 4.0 - lam_lib), 1e-5),
        OracleCheck("free_eigenvalues", eig_err, 1e-7),
        OracleCheck("free_parity_vs_full", split, 1e-7),
    ]
