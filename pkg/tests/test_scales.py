"""Spacing scale rho and coupling sigma: root quality, expansion, monotonicity."""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from aclayers import DomainError, rho_expansion, scales_of, solve_rho
from aclayers.profile import BETA_EXACT, SQRT2

# frozen from a bisection oracle on the log-form equation, xtol 1e-15
RHO_ORACLE = {
    0.1: 2.584834886932339,
    0.05: 3.3762268364408143,
    0.025: 4.201802031792462,
    0.0125: 5.051790434917921,
    0.01: 5.329519830945392,
    1e-4: 11.310158431111715,
}


def test_solve_rho_frozen_oracle_values():
    for eps, rho in RHO_ORACLE.items():
        assert solve_rho(eps) == pytest.approx(rho, rel=1e-13)


def test_solve_rho_against_bisection_oracle():
    for eps in (0.15, 0.03, 1e-3, 1e-6):
        oracle = brentq(
            lambda r: -SQRT2 * r - math.log(eps**2 * r), 0.5, 100.0,
            xtol=1e-15, rtol=8.9e-16)
        assert solve_rho(eps) == pytest.approx(oracle, rel=1e-12)


def test_solve_rho_defining_residual():
    for eps in (0.1, 0.05, 0.01, 1e-4):
        rho = solve_rho(eps)
        target = eps**2 * rho
        assert abs(math.exp(-SQRT2 * rho) - target) < 1e-12 * target


def test_solve_rho_monotone_in_epsilon():
    eps = np.geomspace(1e-6, 0.19, 25)
    rhos = [solve_rho(float(e)) for e in eps]
    assert all(a > b for a, b in zip(rhos, rhos[1:]))


def test_solve_rho_domain():
    for bad in (0.0, -0.1, 0.2, 0.5):
        with pytest.raises(DomainError):
            solve_rho(bad)


def test_rho_expansion_formula():
    big_l = math.log(1e4)
    expected = SQRT2 * big_l - math.log(SQRT2 * big_l) / SQRT2
    assert rho_expansion(1e-4) == pytest.approx(expected, rel=1e-15)


def test_rho_expansion_close_at_moderate_eps():
    assert abs(solve_rho(1e-2) - rho_expansion(1e-2)) < 0.5


def test_rho_expansion_ratio_bounded():
    # |solve - expansion| * log(1/eps)/loglog(1/eps) stays in [0, 2]
    for eps in (1e-2, 1e-3, 1e-4, 1e-6):
        err = abs(solve_rho(eps) - rho_expansion(eps))
        big_l = math.log(1.0 / eps)
        ratio = err * big_l / math.log(math.log(1.0 / eps))
        assert 0.0 <= ratio <= 2.0


def test_scales_of_bundle():
    s = scales_of(0.01)
    assert s.sigma == pytest.approx(1.0 / (BETA_EXACT * s.rho), rel=1e-14)
    assert s.sigma * s.rho * s.beta == pytest.approx(1.0, rel=1e-14)
    assert s.rho == pytest.approx(RHO_ORACLE[0.01], rel=1e-13)


def test_scales_sigma_increasing_in_epsilon():
    eps = np.geomspace(1e-6, 0.19, 25)
    sigmas = [scales_of(float(e)).sigma for e in eps]
    assert all(a < b for a, b in zip(sigmas, sigmas[1:]))


def test_scales_sigma_log_band():
    # sigma * log(1/eps) stays within a fixed band of 2/(sqrt(2)*beta)
    center = 2.0 / (SQRT2 * BETA_EXACT)
    for eps in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6):
        val = scales_of(eps).sigma * math.log(1.0 / eps)
        assert 0.3 * center <= val <= 3.0 * center


def test_scales_domain():
    with pytest.raises(DomainError):
        scales_of(0.3)
