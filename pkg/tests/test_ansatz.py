"""Strip ansatz: assembly, operator, residual decomposition, norms, solvers.

Oracle strategy: the single heteroclinic is an exact solution of the
transverse ODE, so its strip residual has the closed form -eps^2 z K w';
kernel forcings invert to (0, -1) exactly; the two-layer Newton solve is
checked against the Toda-predicted spacing rho + v.
"""

import math

import numpy as np
import pytest

from aclayers import ConvergenceError, DomainError, NumericalError, WindowError
from aclayers.ansatz import (
    M_BUDGET,
    StripField,
    StripGrid,
    assemble_u0,
    cutoff,
    default_strip_grid,
    expansion_prediction,
    level_sets,
    newton_allen_cahn,
    residual,
    residual_closed_form,
    residual_report,
    solve_projected,
    strip_energy,
    strip_operator,
    truncation_error,
    weighted_norm,
    window_cutoff,
)
from aclayers.geometry import ClosedCurve, PeriodicField, PeriodicGrid, sample_curvature
from aclayers.profile import SQRT2, heteroclinic, heteroclinic_derivative
from aclayers.scales import scales_of
from aclayers.toda import HStack, equilibrium_gap_forcing, f_from_h, solve_toda

TWO_PI = 2.0 * math.pi
B1 = 2.0 * math.sqrt(2.0) / 3.0


def circle_K(n=16, amp=0.0):
    grid = PeriodicGrid(n=n, length=TWO_PI)
    if amp == 0.0:
        curve = ClosedCurve.constant(TWO_PI, 1.0)
        return sample_curvature(curve, grid)
    pts = grid.points()
    return PeriodicField(grid, 1.0 + amp * np.cos(pts))


def flat_layers(K, m):
    return HStack.from_array(K.grid, np.zeros((m, K.grid.n)))


def toda_layers(K, m, epsilon):
    s = scales_of(epsilon)
    gbar = equilibrium_gap_forcing(K, m, s.beta)
    return solve_toda(K, s, m, gbar=gbar)


# ---------------------------------------------------------------- grids


def test_strip_grid_validation():
    y = PeriodicGrid(16, TWO_PI)
    with pytest.raises(DomainError):
        StripGrid(y, 10.0, 200)  # even n_t
    with pytest.raises(DomainError):
        StripGrid(y, 10.0, 13)  # too few points
    with pytest.raises(DomainError):
        StripGrid(y, -1.0, 21)


def test_strip_grid_axes():
    grid = StripGrid(PeriodicGrid(16, TWO_PI), 12.0, 193)
    t = grid.t
    assert t[0] == -12.0 and t[-1] == 12.0
    assert t[grid.n_t // 2] == 0.0
    assert grid.dt == pytest.approx(0.125)
    assert grid.shape == (16, 193)


def test_strip_field_validation():
    grid = StripGrid(PeriodicGrid(16, TWO_PI), 12.0, 21)
    with pytest.raises(DomainError):
        StripField(grid, np.zeros((16, 20)))
    bad = np.zeros((16, 21))
    bad[3, 7] = np.nan
    with pytest.raises(DomainError):
        StripField(grid, bad)


def test_default_strip_grid_window():
    K = circle_K()
    eps = 0.05
    s = scales_of(eps)
    for m in (1, 2, 3):
        grid = default_strip_grid(K, eps, m)
        assert grid.t_extent == pytest.approx((m / 2.0 + 1.0) * s.rho + 6.0)
        assert grid.n_t % 2 == 1
        assert grid.y_grid.n >= 16 and grid.y_grid.n % 2 == 0
        assert grid.y_grid.length == pytest.approx(TWO_PI / eps)


# ---------------------------------------------------------------- assembly


def test_single_layer_is_heteroclinic():
    K = circle_K()
    grid = default_strip_grid(K, 0.05, 1, n_y=16)
    f0 = PeriodicField(K.grid, np.zeros(16))
    u0 = assemble_u0([f0], grid, 0.05)
    expected = np.tile(heteroclinic(grid.t), (16, 1))
    assert np.abs(u0.values - expected).max() < 1e-14
    assert abs(u0.values[0, grid.n_t // 2]) < 1e-15


def test_two_layer_center_value():
    K = circle_K()
    eps = 0.05
    s = scales_of(eps)
    grid = default_strip_grid(K, eps, 2, n_y=16)
    u0 = assemble_u0(f_from_h(flat_layers(K, 2), s), grid, eps)
    center = 2.0 * heteroclinic(s.rho / 2.0) - 1.0
    assert u0.values[:, grid.n_t // 2] == pytest.approx(center, abs=1e-12)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_far_field_limits(m):
    K = circle_K()
    eps = 0.05
    s = scales_of(eps)
    grid = default_strip_grid(K, eps, m, n_y=16)
    f = f_from_h(flat_layers(K, m), s)
    u0 = assemble_u0(f, grid, eps)
    fmax = max(float(np.abs(fj.values).max()) for fj in f)
    bound = 3.0 * math.exp(-SQRT2 * (grid.t_extent - fmax))
    top = (-1.0) ** (m - 1)
    assert np.abs(u0.values[:, -1] - top).max() < bound
    assert np.abs(u0.values[:, 0] + 1.0).max() < bound
    assert truncation_error(grid, f) == pytest.approx(bound)


def test_narrow_grid_rejected():
    K = circle_K()
    eps = 0.05
    s = scales_of(eps)
    grid = StripGrid(PeriodicGrid(16, TWO_PI / eps), 1.5 * s.rho, 201)
    with pytest.raises(WindowError):
        assemble_u0(f_from_h(flat_layers(K, 2), s), grid, eps)
    with pytest.raises(WindowError):
        truncation_error(StripGrid(PeriodicGrid(16, TWO_PI / eps), 1.0, 21),
                         f_from_h(flat_layers(K, 3), s))


# ---------------------------------------------------------------- operator


def test_operator_linearity():
    K = circle_K(amp=0.3)
    grid = StripGrid(PeriodicGrid(16, TWO_PI / 0.05), 10.0, 161)
    rng = np.random.default_rng(3)
    u = StripField(grid, rng.standard_normal(grid.shape))
    v = StripField(grid, rng.standard_normal(grid.shape))
    lhs = strip_operator(StripField(grid, 2.0 * u.values - 0.5 * v.values), K, 0.05)
    rhs = 2.0 * strip_operator(u, K, 0.05).values \
        - 0.5 * strip_operator(v, K, 0.05).values
    assert np.abs(lhs.values - rhs).max() < 1e-12


def test_operator_y_mode_exact():
    # pure y-Fourier mode: spectral d_yy is exact, t-derivatives vanish
    K = circle_K()
    eps = 0.05
    grid = StripGrid(PeriodicGrid(32, TWO_PI / eps), 10.0, 161)
    y = grid.y_grid.points()
    for j in (1, 3):
        wave = np.cos(2.0 * np.pi * j * y / grid.y_grid.length)
        u = StripField(grid, np.tile(wave[:, None], (1, grid.n_t)))
        out = strip_operator(u, K, eps)
        expected = -(2.0 * np.pi * j / grid.y_grid.length) ** 2 * u.values
        assert np.abs(out.values - expected).max() < 1e-13


def test_operator_drift_sign():
    # S(w(z)) = -eps^2 z K w': curvature pushes the layer outward
    K = circle_K()
    eps = 0.05
    grid = default_strip_grid(K, eps, 1, n_y=16)
    u = StripField(grid, np.tile(heteroclinic(grid.t), (16, 1)))
    res = residual(u, K, eps)
    expected = -eps**2 * grid.t * heteroclinic_derivative(grid.t)
    interior = slice(8, grid.n_t - 8)
    err = np.abs(res.values[:, interior] - expected[None, interior]).max()
    assert err < 1e-5


def test_residual_constant_state():
    K = circle_K(amp=0.3)
    grid = StripGrid(PeriodicGrid(16, TWO_PI / 0.05), 10.0, 161)
    u = StripField(grid, np.ones(grid.shape))
    assert np.abs(residual(u, K, 0.05).values).max() < 1e-13


# ------------------------------------------------------- closed-form residual


def test_closed_form_single_layer_exact():
    K = circle_K()
    eps = 0.05
    grid = default_strip_grid(K, eps, 1, n_y=16)
    f0 = PeriodicField(K.grid, np.zeros(16))
    out = residual_closed_form([f0], grid, K, eps)
    expected = -eps**2 * grid.t[None, :] * heteroclinic_derivative(grid.t)[None, :]
    assert np.abs(out.values - expected).max() < 1e-14


def test_closed_form_matches_fd_interior():
    K = circle_K()
    eps = 0.05
    sol = toda_layers(K, 2, eps)
    s = scales_of(eps)
    f = f_from_h(sol.h, s)
    grid = default_strip_grid(K, eps, 2, n_y=16)
    r_fd = residual(assemble_u0(f, grid, eps), K, eps)
    r_cf = residual_closed_form(f, grid, K, eps)
    interior = slice(8, grid.n_t - 8)
    err = np.abs(r_fd.values[:, interior] - r_cf.values[:, interior]).max()
    assert err < 5e-6
    # the wall rows differ: reflection closure vs exact tails
    assert np.abs(r_cf.values).max() > 1e-3


def test_closed_form_variable_curvature():
    # y-dependent K and h exercise the tangential-derivative terms
    K = circle_K(amp=0.3)
    eps = 0.05
    s = scales_of(eps)
    heights = 0.05 * np.sin(circle_K().grid.points())
    h = HStack.from_array(K.grid, np.stack([heights, -heights]))
    f = f_from_h(h, s)
    grid = default_strip_grid(K, eps, 2, n_y=16)
    r_fd = residual(assemble_u0(f, grid, eps), K, eps)
    r_cf = residual_closed_form(f, grid, K, eps)
    interior = slice(8, grid.n_t - 8)
    err = np.abs(r_fd.values[:, interior] - r_cf.values[:, interior]).max()
    assert err < 1e-5


# ---------------------------------------------------------------- expansion


def test_expansion_center_layer_balance():
    # middle layer of a symmetric flat triple: both neighbor pulls cancel at 0
    K = circle_K()
    eps = 0.05
    s = scales_of(eps)
    grid = default_strip_grid(K, eps, 3, n_y=16)
    pred = expansion_prediction(2, flat_layers(K, 3), K, eps, grid,
                                t_window=s.rho / 2.0)
    assert np.abs(pred.values[:, grid.n_t // 2]).max() < 1e-15


def test_expansion_tracks_residual():
    K = circle_K()
    eps = 0.01
    s = scales_of(eps)
    h = flat_layers(K, 2)
    f = f_from_h(h, s)
    grid = default_strip_grid(K, eps, 2, n_y=16)
    res = residual_closed_form(f, grid, K, eps)
    pred = expansion_prediction(2, h, K, eps, grid, t_window=s.rho / 2.0)
    mask = np.abs(grid.t - f[1].values[0]) <= s.rho / 2.0
    err = np.abs(res.values[:, mask] - pred.values[:, mask]).max()
    scale = np.abs(res.values[:, mask]).max()
    assert err < 0.08 * scale


def test_expansion_window_validation():
    K = circle_K()
    eps = 0.05
    s = scales_of(eps)
    grid = default_strip_grid(K, eps, 2, n_y=16)
    h = flat_layers(K, 2)
    with pytest.raises(WindowError):
        expansion_prediction(1, h, K, eps, grid, t_window=s.rho / 2.0 + M_BUDGET + 1.0)
    with pytest.raises(WindowError):
        expansion_prediction(1, h, K, eps, grid, t_window=0.0)
    with pytest.raises(DomainError):
        expansion_prediction(3, h, K, eps, grid, t_window=1.0)
    with pytest.raises(DomainError):
        expansion_prediction(0, h, K, eps, grid, t_window=1.0)


# ---------------------------------------------------------------- norms


def test_weighted_norm_zero_and_homogeneity():
    grid = StripGrid(PeriodicGrid(16, TWO_PI), 6.0, 49)
    zero = StripField(grid, np.zeros(grid.shape))
    assert weighted_norm(zero, 4.0, 1.0) == 0.0
    rng = np.random.default_rng(11)
    g = rng.standard_normal(grid.shape)
    for p in (1.0, 4.0, np.inf):
        n1 = weighted_norm(StripField(grid, g), p, 0.8)
        n2 = weighted_norm(StripField(grid, 2.0 * g), p, 0.8)
        assert n2 == pytest.approx(2.0 * n1, rel=1e-12)


def test_weighted_norm_sup_exponential():
    # g = e^{-sigma|t|}: every center with |t_c| >= floor(1/dt)*dt attains
    # weight * ball-max = e^{sigma * floor(1/dt) * dt}
    grid = StripGrid(PeriodicGrid(16, TWO_PI), 12.0, 193)
    sigma = 0.9
    g = StripField(grid, np.tile(np.exp(-sigma * np.abs(grid.t)), (16, 1)))
    kt = math.floor(1.0 / grid.dt)
    expected = math.exp(sigma * kt * grid.dt)
    assert weighted_norm(g, np.inf, sigma) == pytest.approx(expected, rel=1e-12)


def test_weighted_norm_brute_force():
    grid = StripGrid(PeriodicGrid(16, TWO_PI), 2.5, 17)
    rng = np.random.default_rng(5)
    g = rng.standard_normal(grid.shape)
    p, sigma = 4.0, 0.7
    dy, dt = grid.y_grid.spacing, grid.dt
    n_y, n_t = grid.shape
    best = 0.0
    for ic in range(n_y):
        for jc in range(n_t):
            acc = 0.0
            for i in range(n_y):
                for j in range(n_t):
                    ddy = min(abs(i - ic), n_y - abs(i - ic)) * dy
                    ddt = abs(j - jc) * dt
                    if ddy**2 + ddt**2 <= 1.0 + 1e-12:
                        acc += abs(g[i, j]) ** p * dy * dt
            best = max(best, math.exp(sigma * abs(grid.t[jc])) * acc ** (1.0 / p))
    assert weighted_norm(StripField(grid, g), p, sigma) == pytest.approx(best, rel=1e-12)


def test_weighted_norm_rejects_bad_parameters():
    grid = StripGrid(PeriodicGrid(16, TWO_PI), 6.0, 49)
    g = StripField(grid, np.ones(grid.shape))
    with pytest.raises(DomainError):
        weighted_norm(g, 0.5, 1.0)
    with pytest.raises(DomainError):
        weighted_norm(g, 4.0, 0.0)
    with pytest.raises(DomainError):
        weighted_norm(g, 4.0, SQRT2)


# ---------------------------------------------------------------- projection


def projected_grid():
    return StripGrid(PeriodicGrid(16, TWO_PI), 12.0, 201)


def trapezoid(grid):
    wt = np.full(grid.n_t, grid.dt)
    wt[0] *= 0.5
    wt[-1] *= 0.5
    return wt


def test_projected_kernel_forcing():
    grid = projected_grid()
    wp = heteroclinic_derivative(grid.t)
    g = StripField(grid, np.tile(wp, (16, 1)))
    phi, c = solve_projected(g, 0.05)
    assert np.abs(phi.values).max() < 1e-12
    assert np.abs(c.values + 1.0).max() < 1e-12


def test_projected_modulated_kernel():
    # g = (1 - w^2) q(y) = sqrt2 q(y) w'  ->  c = -sqrt2 q, phi = 0
    grid = projected_grid()
    y = grid.y_grid.points()
    q = 1.0 + 0.3 * np.cos(2.0 * np.pi * y / grid.y_grid.length)
    w = heteroclinic(grid.t)
    g = StripField(grid, q[:, None] * (1.0 - w**2)[None, :])
    phi, c = solve_projected(g, 0.05)
    assert np.abs(c.values + SQRT2 * q).max() < 1e-12
    assert np.abs(phi.values).max() < 1e-12


def test_projected_orthogonality():
    grid = projected_grid()
    rng = np.random.default_rng(7)
    g = StripField(grid, rng.standard_normal(grid.shape)
                   * np.exp(-0.8 * np.abs(grid.t))[None, :])
    phi, _ = solve_projected(g, 0.05)
    wt = trapezoid(grid)
    wp = heteroclinic_derivative(grid.t)
    inner = np.abs((phi.values * (wt * wp)[None, :]).sum(axis=1)).max()
    assert inner < 1e-12 * np.abs(phi.values).max()


def test_projected_self_adjoint():
    # <g1, phi2> = <g2, phi1> for forcings orthogonal to the kernel
    grid = projected_grid()
    rng = np.random.default_rng(9)
    wt = trapezoid(grid)
    wp = heteroclinic_derivative(grid.t)
    b = (wt * wp * wp).sum()

    def make():
        raw = rng.standard_normal(grid.shape) * np.exp(-0.8 * np.abs(grid.t))[None, :]
        coef = (raw * (wt * wp)[None, :]).sum(axis=1) / b
        return raw - coef[:, None] * wp[None, :]

    g1, g2 = make(), make()
    phi1, _ = solve_projected(StripField(grid, g1), 0.05)
    phi2, _ = solve_projected(StripField(grid, g2), 0.05)
    i12 = (g1 * phi2.values * wt[None, :]).sum()
    i21 = (g2 * phi1.values * wt[None, :]).sum()
    assert i12 == pytest.approx(i21, rel=1e-12)


def test_projected_stability_across_epsilon():
    # the inversion constant stays O(1) as the strip lengthens
    ratios = []
    for eps in (0.1, 0.05, 0.025):
        grid = StripGrid(PeriodicGrid(32, TWO_PI / eps), 12.0, 201)
        y = grid.y_grid.points()
        q = 1.0 + 0.3 * np.cos(2.0 * np.pi * y / grid.y_grid.length)
        g = StripField(grid, q[:, None] * np.exp(-0.9 * np.abs(grid.t))[None, :])
        phi, _ = solve_projected(g, eps)
        ratios.append(weighted_norm(phi, np.inf, 1.0) / weighted_norm(g, 4.0, 1.0))
    assert max(ratios) / min(ratios) < 2.0


# ---------------------------------------------------------------- energy


def test_energy_pure_phase():
    grid = StripGrid(PeriodicGrid(16, TWO_PI / 0.05), 10.0, 161)
    u = StripField(grid, np.ones(grid.shape))
    assert strip_energy(u, 0.05) < 1e-15


def test_energy_zero_state():
    eps = 0.05
    grid = StripGrid(PeriodicGrid(16, TWO_PI / eps), 10.0, 161)
    u = StripField(grid, np.zeros(grid.shape))
    expected = eps * grid.y_grid.length * 2.0 * grid.t_extent / 4.0
    assert strip_energy(u, eps) == pytest.approx(expected, rel=1e-12)


def test_energy_single_layer():
    # one transition layer costs b1 per unit curve length
    K = circle_K()
    eps = 0.05
    grid = default_strip_grid(K, eps, 1, n_y=16)
    f0 = PeriodicField(K.grid, np.zeros(16))
    u = assemble_u0([f0], grid, eps)
    assert strip_energy(u, eps) == pytest.approx(TWO_PI * B1, rel=1e-6)


# ---------------------------------------------------------------- level sets


def test_level_sets_shifted_layer():
    K = circle_K()
    eps = 0.05
    grid = default_strip_grid(K, eps, 1, n_y=16)
    f = PeriodicField(K.grid, np.full(16, 0.3))
    u = assemble_u0([f], grid, eps)
    curves = level_sets(u)
    assert curves.shape == (16, 1)
    assert np.abs(curves - 0.3).max() < 1e-4


def test_level_sets_inconsistent_count():
    grid = StripGrid(PeriodicGrid(16, TWO_PI), 6.0, 49)
    a = np.where(np.arange(16) < 8, 1.0, -1.0)
    vals = grid.t[None, :] ** 2 - a[:, None]  # two crossings or none
    vals = np.clip(vals, -1.4, 1.4)
    with pytest.raises(NumericalError):
        level_sets(StripField(grid, vals))


# ---------------------------------------------------------------- report


def test_residual_report_two_layers():
    K = circle_K()
    eps = 0.1
    sol = toda_layers(K, 2, eps)
    grid = default_strip_grid(K, eps, 2)  # n_y = 32: norms carry the cell area
    rep = residual_report(sol.h, K, eps, grid)
    assert rep.total == pytest.approx(1.146186, rel=1e-4)
    assert rep.remainder == pytest.approx(4.684e-3, rel=1e-2)
    assert rep.interaction == pytest.approx(0.21686, rel=1e-3)
    assert rep.curvature == pytest.approx(0.89112, rel=1e-3)
    assert rep.jacobi == pytest.approx(0.31076, rel=1e-3)
    assert rep.gradient_sq < 1e-20  # constant K, flat gaps in y
    assert rep.total <= rep.term_sum() + rep.slack
    assert rep.remainder < 0.01 * rep.total


def test_residual_report_decays():
    K = circle_K()
    reps = []
    for eps in (0.1, 0.05):
        sol = toda_layers(K, 2, eps)
        grid = default_strip_grid(K, eps, 2)
        reps.append(residual_report(sol.h, K, eps, grid))
    assert reps[1].total < 0.55 * reps[0].total
    assert reps[1].remainder < 0.25 * reps[0].remainder


# ---------------------------------------------------------------- cutoffs


def test_cutoff_profile():
    assert cutoff(0.5) == 1.0
    assert cutoff(1.5) == pytest.approx(0.5)
    assert cutoff(2.5) == 0.0
    s = np.linspace(0.0, 3.0, 301)
    vals = cutoff(s)
    assert np.all(np.diff(vals) <= 1e-15)


def test_window_cutoff_plateau():
    rho = 4.0
    t = np.array([0.0, rho / 2.0 + 2.0 * M_BUDGET + 0.9, rho / 2.0 + 2.0 * M_BUDGET + 2.1])
    vals = window_cutoff(t, rho)
    assert vals[0] == 1.0
    assert vals[1] == 1.0
    assert vals[2] == 0.0


# ---------------------------------------------------------------- newton


def test_newton_single_layer():
    K = circle_K()
    eps = 0.05
    grid = default_strip_grid(K, eps, 1, n_y=16)
    f0 = PeriodicField(K.grid, np.zeros(16))
    u0 = assemble_u0([f0], grid, eps)
    rep = newton_allen_cahn(u0, K, eps)
    assert rep.iterations <= 5
    assert rep.residual_norms[-1] < 1e-9
    assert all(b < a for a, b in zip(rep.residual_norms, rep.residual_norms[1:]))
    assert rep.level_curves.shape == (16, 1)
    assert np.abs(rep.level_curves).max() < 1e-8


def test_newton_two_layers_matches_toda_spacing():
    K = circle_K()
    eps = 0.05
    s = scales_of(eps)
    sol = toda_layers(K, 2, eps)
    grid = default_strip_grid(K, eps, 2, n_y=16)
    u0 = assemble_u0(f_from_h(sol.h, s), grid, eps)
    rep = newton_allen_cahn(u0, K, eps)
    assert rep.residual_norms[-1] < 1e-9
    assert rep.level_curves.shape == (16, 2)
    spacing = float((rep.level_curves[:, 1] - rep.level_curves[:, 0]).mean())
    predicted = s.rho + float(sol.v.gap_array()[0].mean())
    assert abs(spacing - predicted) < 0.01 * predicted


def test_newton_rejects_bad_initial_state():
    K = circle_K()
    eps = 0.05
    grid = default_strip_grid(K, eps, 1, n_y=16)
    f0 = PeriodicField(K.grid, np.zeros(16))
    u0 = assemble_u0([f0], grid, eps)
    with pytest.raises(DomainError):
        newton_allen_cahn(StripField(grid, 2.0 * u0.values), K, eps)
    with pytest.raises(DomainError):
        newton_allen_cahn(StripField(grid, np.full(grid.shape, 0.9)), K, eps)
