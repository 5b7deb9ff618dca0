"""Problem definition shared by all modules."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .ode_core import DEFAULT_ATOL, DEFAULT_RTOL

EXPONENTIAL = "exp"
POWER = "power"

# numba-side codes
KIND_EXP, KIND_POWER = 0, 1


@dataclass(frozen=True)
class Nonlinearity:
    """``f(u) = e^u`` or ``f(u) = (u + 1)^p``."""

    kind: str = EXPONENTIAL
    p: Optional[float] = None

    def __post_init__(self):
        if self.kind not in (EXPONENTIAL, POWER):
            raise ValueError(f"unknown nonlinearity {self.kind!r}")
        if self.kind == POWER:
            if self.p is None or not self.p > 1:
                raise ValueError("power nonlinearity needs p > 1")
        elif self.p is not None:
            raise ValueError("p is only meaningful for the power nonlinearity")

    @classmethod
    def exponential(cls) -> "Nonlinearity":
        return cls(EXPONENTIAL)

    @classmethod
    def power(cls, p: float) -> "Nonlinearity":
        return cls(POWER, float(p))

    @property
    def code(self) -> int:
        return KIND_EXP if self.kind == EXPONENTIAL else KIND_POWER

    @property
    def p_or_zero(self) -> float:
        return 0.0 if self.p is None else self.p

    def f(self, u):
        if self.kind == EXPONENTIAL:
            return np.exp(u)
        return np.maximum(np.asarray(u) + 1.0, 0.0) ** self.p

    def df(self, u):
        if self.kind == EXPONENTIAL:
            return np.exp(u)
        return self.p * np.maximum(np.asarray(u) + 1.0, 0.0) ** (self.p - 1.0)

    def g(self, s):
        """``s f'(s) / f(s)``."""
        if self.kind == EXPONENTIAL:
            return np.asarray(s, dtype=float)
        s = np.asarray(s, dtype=float)
        return self.p * s / (s + 1.0)

    def label(self) -> str:
        return "exp" if self.kind == EXPONENTIAL else f"power(p={self.p:g})"


@dataclass(frozen=True)
class ProblemSpec:
    """``u'' + lam |x|^l f(u) = 0`` on (-1, 1) with zero boundary values."""

    l: float = 1.0
    nonlinearity: Nonlinearity = field(default_factory=Nonlinearity.exponential)
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    root_tol: float = 1e-13
    alpha_max: Optional[float] = None

    def __post_init__(self):
        if not self.l >= 0:
            raise ValueError(f"l must be >= 0, got {self.l}")
        if not (self.rtol > 0 and self.atol > 0 and self.root_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.alpha_max is None:
            object.__setattr__(
                self, "alpha_max", 30.0 if self.nonlinearity.kind == EXPONENTIAL else 50.0)
        if not self.alpha_max > 0:
            raise ValueError("alpha_max must be positive")

    @property
    def tol(self) -> tuple:
        return (self.rtol, self.atol)

    @property
    def generator_tol(self) -> tuple:
        """The generator is integrated once and reused everywhere, so it gets
        two extra digits; interpolated second derivatives need them."""
        return (self.rtol * 1e-2, self.atol * 1e-2)

    @property
    def is_power(self) -> bool:
        return self.nonlinearity.kind == POWER

    @property
    def theorem_hypotheses_met(self) -> bool:
        """l > 0, and (p - 1) l > 4 for the power nonlinearity."""
        if not self.l > 0:
            return False
        if self.is_power:
            return (self.nonlinearity.p - 1.0) * self.l > 4.0
        return True

    def with_tol(self, rtol=None, atol=None) -> "ProblemSpec":
        return replace(self, rtol=rtol or self.rtol, atol=atol or self.atol)

    def to_dict(self) -> dict:
        return {
            "l": self.l,
            "nonlinearity": self.nonlinearity.kind,
            "p": self.nonlinearity.p,
            "rtol": self.rtol,
            "atol": self.atol,
            "root_tol": self.root_tol,
            "alpha_max": self.alpha_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        nl = (Nonlinearity.power(d["p"]) if d["nonlinearity"] == POWER
              else Nonlinearity.exponential())
        return cls(l=d["l"], nonlinearity=nl, rtol=d["rtol"], atol=d["atol"],
                   root_tol=d["root_tol"], alpha_max=d["alpha_max"])


def exponential_spec(l: float = 1.0, **kw) -> ProblemSpec:
    return ProblemSpec(l=l, nonlinearity=Nonlinearity.exponential(), **kw)


def power_spec(p: float = 7.0, l: float = 1.0, **kw) -> ProblemSpec:
    return ProblemSpec(l=l, nonlinearity=Nonlinearity.power(p), **kw)


def integral_M(l: float) -> float:
    """Double integral of |t|^l over -1 < t < x < 1 (without the lam factor).

    Equals the integral of (1 - t)|t|^l over (-1, 1), i.e. 2 / (l + 1).
    """
    return 2.0 / (l + 1.0) if math.isfinite(l) else math.nan
