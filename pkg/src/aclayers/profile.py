"""The scalar heteroclinic profile and its interaction constants.

w(t) = tanh(t/sqrt(2)) is the unique (up to translation) monotone solution of
w'' + w - w^3 = 0 joining -1 to +1. Three integrals of w drive everything
downstream: the transition energy c_star, the Dirichlet mass b1 = int w'^2,
and the tail-interaction integral b2. Their ratio beta = b2/b1 sets the
strength of the exponential layer interaction relative to geometric forcing.

All evaluations are closed-form (tanh/sech); nothing is tabulated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._quad import boole_adaptive
from .errors import DomainError, NumericalError

SQRT2 = math.sqrt(2.0)

# Closed forms: int sech^4 gives b1 = 2*sqrt(2)/3; the substitution
# x = e^{2u} reduces b2 to 48*int_0^inf x^2/(1+x)^4 dx = 16.
B1_EXACT = 2.0 * SQRT2 / 3.0
B2_EXACT = 16.0
BETA_EXACT = B2_EXACT / B1_EXACT  # = 12*sqrt(2)


@dataclass(frozen=True)
class ProfileConstants:
    """The four interaction constants of the profile.

    c_star: transition energy int 1/2 w'^2 + 1/4 (1-w^2)^2
    b1:     int w'^2
    b2:     int 6 (1-w^2) e^{sqrt(2) t} w'
    beta:   b2 / b1
    """

    c_star: float
    b1: float
    b2: float
    beta: float

    def __post_init__(self) -> None:
        for name in ("c_star", "b1", "b2", "beta"):
            if not getattr(self, name) > 0.0:
                raise DomainError(f"{name} must be positive")
        if abs(self.beta * self.b1 - self.b2) > 1e-12 * abs(self.b2):
            raise DomainError("beta*b1 must equal b2 to relative 1e-12")
        # equipartition w' = (1-w^2)/sqrt(2) forces c_star == b1
        if abs(self.c_star - self.b1) > 1e-10 * abs(self.b1):
            raise DomainError("c_star must equal b1 to relative 1e-10")


def exact_constants() -> ProfileConstants:
    """Constants by closed-form reduction (no quadrature)."""
    return ProfileConstants(c_star=B1_EXACT, b1=B1_EXACT, b2=B2_EXACT, beta=BETA_EXACT)


def heteroclinic(t):
    """w(t) = tanh(t/sqrt(2)); odd, strictly increasing, range (-1, 1)."""
    return np.tanh(np.asarray(t, dtype=float) / SQRT2)[()]


def heteroclinic_derivative(t):
    """w'(t) = (1/sqrt(2)) sech^2(t/sqrt(2)); even, positive, max at 0."""
    th = np.tanh(np.asarray(t, dtype=float) / SQRT2)
    return ((1.0 - th * th) / SQRT2)[()]


def tail_defect(t: float) -> float:
    """|w(t) - 1 + 2 e^{-sqrt(2) t}| for t > 1.

    Bounded by 4 e^{-2 sqrt(2) t}: the profile approaches its tail
    linearization at twice the decay rate. The bound is resolvable in double
    precision only while 1 - w(t) is, i.e. for t up to about 12.
    """
    if not t > 1.0:
        raise DomainError(f"tail_defect requires t > 1, got {t}")
    return float(abs(math.tanh(t / SQRT2) - 1.0 + 2.0 * math.exp(-SQRT2 * t)))


def _wp(t: np.ndarray) -> np.ndarray:
    th = np.tanh(t / SQRT2)
    return (1.0 - th * th) / SQRT2


def compute_constants(half_width: float = 40.0, tolerance: float = 1e-10) -> ProfileConstants:
    """Interaction constants by composite quadrature on [-T, T].

    Evaluates b2 through both of its equivalent one-sided-weight forms
    (weights e^{+sqrt(2) t} and e^{-sqrt(2) t}) and fails if they disagree
    beyond ``tolerance``; the two agree exactly because the integrand pair
    is related by t -> -t.
    """
    if not tolerance > 0.0:
        raise DomainError("tolerance must be positive")
    if not math.exp(-SQRT2 * half_width) < tolerance:
        raise DomainError(
            f"half_width {half_width} too small for tolerance {tolerance}")

    T = float(half_width)
    rtol = min(1e-13, tolerance)

    def energy(t):
        th = np.tanh(t / SQRT2)
        wp = (1.0 - th * th) / SQRT2
        return 0.5 * wp * wp + 0.25 * (1.0 - th * th) ** 2

    def dirichlet(t):
        wp = _wp(t)
        return wp * wp

    def interaction_plus(t):
        th = np.tanh(t / SQRT2)
        return 6.0 * (1.0 - th * th) * np.exp(SQRT2 * t) * _wp(t)

    def interaction_minus(t):
        th = np.tanh(t / SQRT2)
        return 6.0 * (1.0 - th * th) * np.exp(-SQRT2 * t) * _wp(t)

    c_star = boole_adaptive(energy, -T, T, rtol=rtol)
    b1 = boole_adaptive(dirichlet, -T, T, rtol=rtol)
    b2_plus = boole_adaptive(interaction_plus, -T, T, rtol=rtol)
    b2_minus = boole_adaptive(interaction_minus, -T, T, rtol=rtol)
    if abs(b2_plus - b2_minus) > tolerance * max(abs(b2_plus), 1.0):
        raise NumericalError(
            f"the two interaction quadratures disagree: {b2_plus} vs {b2_minus}")
    b2 = 0.5 * (b2_plus + b2_minus)
    return ProfileConstants(c_star=c_star, b1=b1, b2=b2, beta=b2 / b1)
