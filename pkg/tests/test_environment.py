import numpy as np
import pytest

from shiftwave import environment


def test_tanh_env_limits_and_monotonicity():
    env = environment.tanh_env(alpha_minus=-0.5, alpha_plus=1.0,
                               steepness=1.0)
    z = np.linspace(-50, 50, 2001)
    vals = env.evaluate(z)
    assert vals[0] == pytest.approx(-0.5, abs=1e-12)
    assert vals[-1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(vals) >= 0)
    assert env.alpha_minus < 0 < env.alpha_plus


def test_step_env_values():
    env = environment.step_env(center=2.0, alpha_minus=-1.0, alpha_plus=0.5)
    assert env.evaluate(np.array([1.9]))[0] == -1.0
    assert env.evaluate(np.array([2.1]))[0] == 0.5


def test_piecewise_linear_env():
    env = environment.piecewise_linear_env([-1.0, 1.0], [-0.5, 1.0],
                                           rho=1.0)
    assert env.evaluate(np.array([0.0]))[0] == pytest.approx(0.25)
    assert env.evaluate(np.array([-5.0]))[0] == pytest.approx(-0.5)
    assert env.evaluate(np.array([5.0]))[0] == pytest.approx(1.0)


def test_constant_env():
    env = environment.constant_env(1.0)
    assert np.all(env.evaluate(np.linspace(-9, 9, 11)) == 1.0)


def test_exponential_approach_certificate():
    env = environment.tanh_env(steepness=1.0, rho=1.0)
    report = environment.check_env_conditions(env)
    assert report["pass"], report
    C = report["checks"]["exponential_approach"]["C_fit"]
    z = np.linspace(0.0, 40.0, 2001)
    assert np.all(env.alpha_plus - env.evaluate(z)
                  <= C * np.exp(-env.rho * z) + 1e-12)


def test_declared_rho_above_true_decay_fails():
    # true tanh decay rate is 2*steepness; declaring a faster rho must fail
    env = environment.tanh_env(steepness=0.05, rho=1.0)
    report = environment.check_env_conditions(env)
    assert not report["checks"]["exponential_approach"]["pass"]


def test_normalize_shift_envelope():
    env = environment.tanh_env(steepness=1.0)
    eps = 1e-3
    shifted = environment.normalize_shift(env, eps)
    z = np.linspace(0.0, 60.0, 3001)
    assert np.all(shifted.evaluate(z)
                  >= env.alpha_plus - eps * np.exp(-env.rho * z) - 1e-12)
    A = environment.required_translation(env, eps)
    assert shifted.shift == pytest.approx(A)
    assert A > 0


def test_tabulated_env_from_csv(tmp_path):
    z = np.linspace(-30, 30, 601)
    alpha = -0.5 + 1.5 / (1.0 + np.exp(-2.0 * z))
    path = tmp_path / "env.csv"
    np.savetxt(path, np.column_stack([z, alpha]), delimiter=",",
               header="z,alpha", comments="")
    env = environment.tabulated_env_from_csv(path, rho=1.0)
    assert env.evaluate(np.array([0.0]))[0] == pytest.approx(0.25, abs=1e-6)
    assert environment.check_env_conditions(env)["pass"]


def test_env_from_config_fail_closed():
    env = environment.env_from_config(
        {"family": "tanh_ramp", "alpha_minus": -0.5, "alpha_plus": 1.0})
    assert env.family == "tanh_ramp"
    with pytest.raises(ValueError):
        environment.env_from_config({"family": "tanh_ramp", "slope": 3})
    with pytest.raises(ValueError):
        environment.env_from_config({"family": "nope"})


def test_sign_conditions_enforced():
    with pytest.raises(ValueError):
        environment.tanh_env(alpha_minus=0.1, alpha_plus=1.0)
    with pytest.raises(ValueError):
        environment.tanh_env(alpha_minus=-0.5, alpha_plus=-0.1)
