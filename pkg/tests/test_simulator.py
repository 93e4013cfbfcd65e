import numpy as np
import pytest

from shiftwave import environment, equilibria, simulator


@pytest.fixture(scope="module")
def sim_grid():
    return np.arange(-30.0, 30.0 + 1e-9, 0.1)


def _uniform_state(grid, state, dt):
    u = np.full(grid.size, state[0])
    v = np.full(grid.size, state[1])
    w = np.full(grid.size, state[2])
    return simulator.make_state(grid, u, v, w, dt)


def test_equilibria_are_fixed_points(base_params, uniform_kernels, sim_grid):
    env = environment.constant_env(1.0)
    states = equilibria.compute_states(base_params)
    dt = 0.5 * simulator.stability_dt(base_params, env, sim_grid)
    for target in (states.E1, states.E2, states.E3, states.E4):
        state = _uniform_state(sim_grid, target, dt)
        for _ in range(50):
            new = simulator.step_ide(state, base_params, env,
                                     uniform_kernels)
            assert np.max(np.abs(new.fields - state.fields)) < 1e-12
            state = new


def test_logistic_prey_oracle(base_params, uniform_kernels, sim_grid):
    # spatially uniform prey alone follows w' = r3 w (1 - w)
    env = environment.constant_env(1.0)
    dt = 1e-4
    w0 = 0.2
    state = _uniform_state(sim_grid, (0.0, 0.0, w0), dt)
    work = None
    n = 2000
    for _ in range(n):
        state = simulator.step_ide(state, base_params, env, uniform_kernels)
    t = n * dt
    exact = w0 * np.exp(base_params.r3 * t) \
        / (1.0 - w0 + w0 * np.exp(base_params.r3 * t))
    mid = state.w[sim_grid.size // 2]
    assert mid == pytest.approx(exact, abs=5e-5)


def test_stability_dt_and_no_clipping(base_params, tanh_environment,
                                      uniform_kernels, e1_pair, sim_grid):
    dt = 0.5 * simulator.stability_dt(base_params, tanh_environment,
                                      sim_grid)
    traj = simulator.run_moving_frame((e1_pair, sim_grid), 5.0, base_params,
                                      tanh_environment, uniform_kernels,
                                      dt=dt, check_boundary=False)
    assert traj.diagnostics["clip_count"] == 0
    assert traj.final.t == pytest.approx(5.0, abs=2 * dt)


def test_blowup_detection(base_params, tanh_environment, uniform_kernels,
                          sim_grid):
    # a grossly unstable step size must raise rather than return garbage
    state = _uniform_state(sim_grid, (1.0, 1.0, 1.0), dt=5.0)
    with pytest.raises(simulator.BlowUpError):
        for _ in range(100):
            state = simulator.step_ide(state, base_params, tanh_environment,
                                       uniform_kernels)


def test_domain_too_short(base_params, tanh_environment, uniform_kernels):
    short = np.arange(-10.0, 10.0 + 1e-9, 0.1)
    u = np.zeros(short.size)
    with pytest.raises(simulator.DomainError, match="too short"):
        simulator.run_moving_frame((short, u, u, u), 1.0, base_params,
                                   tanh_environment, uniform_kernels)


def test_front_near_edge_detected(base_params, uniform_kernels):
    # environment transition placed near the right edge parks the front in
    # the outer band
    grid = np.arange(-30.0, 30.0 + 1e-9, 0.1)
    env_off = environment.tanh_env(center=27.0, steepness=1.0)
    u = simulator.plateau_bump(grid, 27.0, 2.0, 0.3)
    w = np.full(grid.size, 0.5)
    with pytest.raises(simulator.DomainError, match="edge"):
        simulator.run_moving_frame((grid, u, 0.0 * u, w), 40.0, base_params,
                                   env_off, uniform_kernels)


def test_fft_matches_direct(base_params, tanh_environment, uniform_kernels,
                            e1_pair, sim_grid):
    dt = 0.5 * simulator.stability_dt(base_params, tanh_environment,
                                      sim_grid)
    u, v, w = simulator.initial_from_pair(e1_pair, sim_grid)
    s1 = simulator.make_state(sim_grid, u, v, w, dt)
    s2 = simulator.make_state(sim_grid, u, v, w, dt)
    for _ in range(20):
        s1 = simulator.step_ide(s1, base_params, tanh_environment,
                                uniform_kernels, use_fft=False)
        s2 = simulator.step_ide(s2, base_params, tanh_environment,
                                uniform_kernels, use_fft=True)
    assert np.max(np.abs(s1.fields - s2.fields)) < 1e-12


def test_rk3_consistent_with_euler(base_params, tanh_environment,
                                   uniform_kernels, e1_pair, sim_grid):
    dt = 0.25 * simulator.stability_dt(base_params, tanh_environment,
                                       sim_grid)
    u, v, w = simulator.initial_from_pair(e1_pair, sim_grid)
    out = {}
    for scheme in ("euler", "rk3"):
        state = simulator.make_state(sim_grid, u, v, w, dt)
        for _ in range(40):
            state = simulator.step_ide(state, base_params, tanh_environment,
                                       uniform_kernels, scheme=scheme)
        out[scheme] = state.fields
    # both first-order-in-space consistent over a short horizon
    assert np.max(np.abs(out["euler"] - out["rk3"])) < 5e-2


def test_classify_limit_cases(base_params):
    states = equilibria.compute_states(base_params)
    n = 400
    ramp = 0.5 * (1.0 + np.tanh(np.linspace(-20, 20, n)))

    prof_e1 = np.vstack([0.0 * ramp, 0.0 * ramp, ramp])
    assert simulator.classify_limit(prof_e1, states, tol=1e-2) == "E1"

    prof_e4 = np.vstack([states.E4[0] * ramp, states.E4[1] * ramp,
                         states.E4[2] * ramp])
    assert simulator.classify_limit(prof_e4, states, tol=1e-2) == "E4"

    # all-zero profile matches extinction
    zero = np.zeros((3, n))
    assert simulator.classify_limit(zero, states, tol=1e-2) == "trivial"

    # nonzero left tail is never a wave of this family
    shifted = np.vstack([ramp[::-1], 0.0 * ramp, ramp])
    assert simulator.classify_limit(shifted, states, tol=1e-2) \
        == "unclassified"

    # far from every state
    odd = np.vstack([0.0 * ramp, 0.0 * ramp, 5.0 * ramp])
    assert simulator.classify_limit(odd, states, tol=1e-2) == "unclassified"

    with pytest.raises(ValueError):
        simulator.classify_limit(np.zeros((2, n)), states, tol=1e-2)


def test_frame_consistency_short_horizon(base_params, tanh_environment,
                                         uniform_kernels):
    # fixed-frame run sampled at x = z + s t must agree with the moving
    # frame up to the first-order drift discretization error
    grid = np.arange(-40.0, 40.0 + 1e-9, 0.05)
    env = tanh_environment
    u0 = simulator.plateau_bump(grid, 0.0, 5.0, 0.2)
    w0 = np.full(grid.size, 0.8)
    T = 1.0

    def final(frame, scheme="rk3"):
        dt = 0.5 * simulator.stability_dt(base_params, env, grid,
                                          frame=frame)
        steps = int(np.ceil(T / dt))
        dt = T / steps
        state = simulator.make_state(grid, u0, 0.0 * u0, w0, dt,
                                     frame=frame)
        for _ in range(steps):
            state = simulator.step_ide(state, base_params, env,
                                       uniform_kernels, scheme=scheme)
        return state

    moving = final("moving")
    fixed = final("fixed")
    s, t = base_params.s, T
    # sample the fixed-frame result along x = z + s t, interior only
    keep = (grid + s * t >= grid[0]) & (grid + s * t <= grid[-1])
    interp = np.vstack([np.interp(grid[keep] + s * t, grid, f)
                        for f in fixed.fields])
    gap = np.max(np.abs(moving.fields[:, keep] - interp))
    assert gap < 5e-3
