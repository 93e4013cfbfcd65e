import dataclasses

import numpy as np
import pytest

from shiftwave import bounds, environment, equilibria, kernels, spectral, wave_solver


@pytest.fixture(scope="session")
def uniform_kernels():
    J = kernels.uniform_kernel(1.0)
    return (J, J, J)


@pytest.fixture(scope="session")
def tanh_environment():
    return environment.tanh_env(alpha_minus=-0.5, alpha_plus=1.0,
                                steepness=1.0)


@pytest.fixture(scope="session")
def base_params(uniform_kernels):
    """(a,b,h,k)=(2,0.1,0.5,0.5), unit rates, s = 1.2 max critical speed."""
    p0 = equilibria.ModelParams(d1=1.0, d2=1.0, d3=1.0, r1=1.0, r2=1.0,
                                r3=1.0, a=2.0, b=0.1, h=0.5, k=0.5, s=1.0)
    sp = spectral.critical_speed(uniform_kernels[0], 1.0,
                                 p0.r1 * (p0.a - 1.0))
    return dataclasses.replace(p0, s=1.2 * sp.s_crit)


@pytest.fixture(scope="session")
def fine_grid():
    return np.arange(-100.0, 100.0 + 1e-9, 0.01)


@pytest.fixture(scope="session")
def coarse_grid():
    return np.arange(-60.0, 60.0 + 1e-9, 0.05)


@pytest.fixture(scope="session")
def e1_pair(base_params, tanh_environment, uniform_kernels):
    return bounds.build_bounds_E1(base_params, tanh_environment,
                                  uniform_kernels)


@pytest.fixture(scope="session")
def e1_solution(base_params, tanh_environment, uniform_kernels, e1_pair,
                fine_grid):
    ctx = wave_solver.make_context(base_params, tanh_environment, e1_pair,
                                   fine_grid)
    return wave_solver.solve_wave(e1_pair, ctx, base_params,
                                  tanh_environment, uniform_kernels,
                                  fine_grid)


@pytest.fixture(scope="session")
def e2_params(uniform_kernels, tanh_environment):
    """(a,b)=(2,0.2), r2 large enough for the growth-dominance gate."""
    p0 = equilibria.ModelParams(d1=1.0, d2=1.0, d3=1.0, r1=1.0, r2=4.62,
                                r3=1.0, a=2.0, b=0.2, h=0.5, k=0.5, s=1.0)
    states = equilibria.compute_states(p0)
    rho = tanh_environment.rho
    R2 = float(spectral.speed_functional(uniform_kernels[1], p0.d2,
                                         p0.r2 * states.beta2, rho))
    sp2m = spectral.critical_speed(uniform_kernels[1], p0.d2,
                                   p0.r2 * states.beta2)
    return dataclasses.replace(p0, s=1.2 * max(R2, sp2m.s_crit))
