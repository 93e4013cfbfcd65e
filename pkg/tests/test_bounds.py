import dataclasses

import numpy as np
import pytest

from shiftwave import bounds, environment, equilibria, kernels, spectral, \
    wave_solver


def test_e1_pair_verifies(e1_pair, base_params, tanh_environment,
                          uniform_kernels, coarse_grid):
    report = bounds.verify_bounds(e1_pair, base_params, tanh_environment,
                                  uniform_kernels, coarse_grid, tol=1e-8)
    assert report["pass"], report
    assert report["ordering"]["pass"]
    assert e1_pair.regime == "e1"
    assert len(e1_pair.kinks) > 0


def test_e1_profile_table_shape(e1_pair, coarse_grid):
    table = e1_pair.profile_table(coarse_grid)
    assert table.shape == (coarse_grid.size, 7)
    assert np.array_equal(table[:, 0], coarse_grid)
    # uppers dominate lowers columnwise
    assert np.all(table[:, 1:4] - table[:, 4:7] >= 0)


def test_e1_undersized_constant_fails_lower(base_params, tanh_environment,
                                            uniform_kernels, coarse_grid):
    good = bounds.build_bounds_E1(base_params, tanh_environment,
                                  uniform_kernels)
    p1 = good.params["p_1"]
    found = False
    for halvings in range(1, 8):
        pair = bounds.build_bounds_E1(base_params, tanh_environment,
                                      uniform_kernels,
                                      p1_override=p1 / 2.0 ** halvings)
        report = bounds.verify_bounds(pair, base_params, tanh_environment,
                                      uniform_kernels, coarse_grid, tol=1e-8)
        if not report["inequalities"]["lower_1"]["pass"]:
            found = True
            break
    assert found, "halving p_1 repeatedly never broke the lower inequality"


def test_e2_pair_verifies(e2_params, tanh_environment, uniform_kernels,
                          coarse_grid):
    pair = bounds.build_bounds_E2(e2_params, tanh_environment,
                                  uniform_kernels)
    report = bounds.verify_bounds(pair, e2_params, tanh_environment,
                                  uniform_kernels, coarse_grid, tol=1e-8)
    assert report["pass"], report
    u_p = equilibria.compute_states(e2_params).u_p
    assert pair.params["right_state"][0] == pytest.approx(u_p)


def test_e2_gate_growth_dominance(base_params, tanh_environment,
                                  uniform_kernels):
    # unit r2 at the base parameters fails r1[1+k(a-1)] <= r2 beta2
    with pytest.raises(bounds.RegimeError, match="beta"):
        bounds.build_bounds_E2(base_params, tanh_environment,
                               uniform_kernels)


def test_e4_pair_verifies(base_params, tanh_environment, uniform_kernels,
                          coarse_grid):
    solver = wave_solver.make_scalar_solver(coarse_grid)
    pair = bounds.build_bounds_E4(base_params, tanh_environment,
                                  uniform_kernels, solver)
    report = bounds.verify_bounds(pair, base_params, tanh_environment,
                                  uniform_kernels, coarse_grid, tol=1e-5)
    assert report["pass"], report
    # lower limits sit below the coexistence state
    states = equilibria.compute_states(base_params)
    right = pair.params["right_state"]
    assert all(0 < r <= e + 1e-12 for r, e in zip(right, states.E4))


def test_e4_gate_small_predation(base_params, tanh_environment,
                                 uniform_kernels, coarse_grid):
    big_b = dataclasses.replace(base_params, b=0.3)
    solver = wave_solver.make_scalar_solver(coarse_grid)
    with pytest.raises(bounds.RegimeError, match="b <"):
        bounds.build_bounds_E4(big_b, tanh_environment, uniform_kernels,
                               solver)


def test_critical_equal_speeds_pair(base_params, tanh_environment,
                                    uniform_kernels, coarse_grid):
    sp = spectral.critical_speed(uniform_kernels[0], 1.0, 1.0)
    params = dataclasses.replace(base_params, s=sp.s_crit)
    pair = bounds.build_bounds_critical(params, tanh_environment,
                                        uniform_kernels, "equal_speeds")
    report = bounds.verify_bounds(pair, params, tanh_environment,
                                  uniform_kernels, coarse_grid, tol=1e-8)
    assert report["pass"], report


def test_critical_requires_exact_speed(base_params, tanh_environment,
                                       uniform_kernels):
    with pytest.raises(bounds.RegimeError, match="critical"):
        bounds.build_bounds_critical(base_params, tanh_environment,
                                     uniform_kernels, "equal_speeds")


def test_critical_requires_compact_support(base_params, tanh_environment):
    J = kernels.gaussian_kernel(0.5)
    sp = spectral.critical_speed(J, 1.0, 1.0)
    params = dataclasses.replace(base_params, s=sp.s_crit)
    with pytest.raises(bounds.RegimeError):
        bounds.build_bounds_critical(params, tanh_environment, (J, J, J),
                                     "equal_speeds")


def test_unknown_critical_case(base_params, tanh_environment,
                               uniform_kernels):
    with pytest.raises(ValueError, match="unknown critical case"):
        bounds.build_bounds_critical(base_params, tanh_environment,
                                     uniform_kernels, "bogus")


def test_unnormalized_environment_rejected(base_params, uniform_kernels):
    env = environment.tanh_env(alpha_minus=-0.5, alpha_plus=2.0)
    with pytest.raises(bounds.RegimeError):
        bounds.build_bounds_E1(base_params, env, uniform_kernels)
