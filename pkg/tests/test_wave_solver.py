import math

import numpy as np
import pytest

from shiftwave import bounds, environment, kernels, wave_solver


def test_half_line_integral_exponential_oracle():
    # int_0^inf e^{-cu} e^{-a(z+u)} du = e^{-az} / (c + a)
    c, a = 2.0, 0.7
    h = 0.01
    z = np.arange(-5.0, 5.0 + 1e-9, h)
    op = wave_solver._HalfLineIntegral(c, h)
    approx = op(np.exp(-a * z))
    # oracle holds exactly only where the grid truncation tail is tiny;
    # compare against the analytic value including the edge-held tail
    z1 = z[-1]
    exact = (np.exp(-a * z)
             - np.exp(-c * (z1 - z)) * np.exp(-a * z1)) / (c + a) \
        + np.exp(-c * (z1 - z)) * np.exp(-a * z1) / c
    # edge cells use duplicated boundary values and their influence decays
    # like e^{-c(z1 - z)}; compare away from both edges
    assert np.max(np.abs(approx - exact)[4:-600]) < 1e-9


def test_half_line_integral_constant_exact():
    op = wave_solver._HalfLineIntegral(1.5, 0.05)
    vals = op(np.full(101, 3.0))
    assert np.allclose(vals, 3.0 / 1.5, atol=1e-13)


def test_exp_moments_series_matches_closed_form():
    h = 0.02
    # straddle the series/recurrence switch at c h = 1e-2
    for c in (1e-6, 0.4, 0.6, 50.0):
        mus = wave_solver._exp_moments(c, h)
        from scipy.integrate import quad
        for r in range(4):
            exact, _ = quad(lambda u: u ** r * math.exp(-c * u), 0.0, h,
                            epsabs=1e-18, epsrel=1e-13)
            assert mus[r] == pytest.approx(exact, rel=1e-7, abs=1e-16)


def test_apply_P_fixes_constant_states(base_params, uniform_kernels):
    env = environment.constant_env(1.0)
    z = np.arange(-20.0, 20.0 + 1e-9, 0.05)
    from shiftwave import equilibria
    states = equilibria.compute_states(base_params)
    for state in (states.E1, states.E2, states.E3, states.E4):
        phi = np.tile(np.asarray(state)[:, None], (1, z.size))
        disc = wave_solver._Discretization(base_params, env,
                                           uniform_kernels, z, beta=8.0)
        out = disc.apply_P(phi)
        assert np.max(np.abs(out - phi)) < 1e-12
        assert np.max(np.abs(disc.residual(phi))) < 1e-12


def test_solve_wave_e1_coarse(base_params, tanh_environment,
                              uniform_kernels, e1_pair, coarse_grid):
    ctx = wave_solver.make_context(base_params, tanh_environment, e1_pair,
                                   coarse_grid)
    wave = wave_solver.solve_wave(e1_pair, ctx, base_params,
                                  tanh_environment, uniform_kernels,
                                  coarse_grid)
    meta = wave.metadata
    assert meta["converged"]
    assert meta["nontrivial_clips"] == 0
    assert meta["residual_sup_interior"] < 1e-6
    lb = np.array([p.fn(wave.z) for p in e1_pair.lowers])
    ub = np.array([p.fn(wave.z) for p in e1_pair.uppers])
    assert np.all(wave.phi >= lb - 1e-12)
    assert np.all(wave.phi <= ub + 1e-12)
    # limits: extinction left, predator-free state right
    assert np.max(np.abs(wave.phi[:, 0])) < 1e-3
    right = wave.phi[:, -1]
    assert np.max(np.abs(right - np.array([0.0, 0.0, 1.0]))) < 1e-3


def test_wave_profile_table_shape(e1_solution):
    table = e1_solution.table()
    assert table.shape == (e1_solution.z.size, 7)
    assert np.array_equal(table[:, 1], e1_solution.phi1)


def test_solve_scalar_envelope_and_tails(coarse_grid, uniform_kernels):
    env = environment.tanh_env(alpha_minus=-0.5, alpha_plus=1.0)
    wave = wave_solver.solve_scalar(uniform_kernels[0], 1.0, 1.0, 1.1,
                                    env.evaluate, 1.0, env.rho, coarse_grid)
    assert wave.metadata["converged"]
    assert wave.limit == 1.0
    B, lam0 = wave.envelope
    assert np.all(wave.values >= 1.0 - B * np.exp(-lam0 * wave.z) - 1e-12)
    assert abs(wave.values[-1] - 1.0) < 1e-3
    assert abs(wave.values[0]) < 1e-3
    # spline extension is constant outside the grid
    assert wave.fn(wave.z[-1] + 10.0) == pytest.approx(wave.values[-1])
    assert wave.dfn(wave.z[-1] + 10.0) == 0.0


def test_tail_decay_rate_synthetic():
    z = np.linspace(0.0, 10.0, 401)
    vals = 3.0 * np.exp(-2.0 * z)
    assert wave_solver.tail_decay_rate(z, vals, (2.0, 8.0)) \
        == pytest.approx(2.0, rel=1e-10)
    with pytest.raises(ValueError):
        wave_solver.tail_decay_rate(z, vals - 1.0, (2.0, 8.0))
    with pytest.raises(ValueError):
        wave_solver.tail_decay_rate(z, vals, (20.0, 30.0))


def test_characteristic_residual_vanishes_at_root(base_params,
                                                  uniform_kernels):
    from shiftwave import spectral
    rc = base_params.r1 * (base_params.a - 1.0)
    cf = spectral.CharFunction(uniform_kernels[0], base_params.d1,
                               base_params.s, rc)
    lam1, _ = spectral.char_roots(cf)
    res = wave_solver.characteristic_residual(lam1, uniform_kernels[0],
                                              base_params.d1, rc,
                                              base_params.s)
    assert res < 1e-12


def test_apply_P_contracts_toward_solution(base_params, tanh_environment,
                                           uniform_kernels, e1_pair,
                                           e1_solution):
    ctx = wave_solver.make_context(base_params, tanh_environment, e1_pair,
                                   e1_solution.z)
    once = wave_solver.apply_P(e1_solution, ctx, base_params,
                               tanh_environment, uniform_kernels)
    assert np.max(np.abs(once.phi - e1_solution.phi)) < 1e-8
