import math

import numpy as np
import pytest
from scipy.optimize import brentq, minimize_scalar

from shiftwave import kernels, spectral


def test_critical_speed_uniform_oracle():
    # for uniform(1), d=rc=1: stationarity reduces to tanh(lam) = lam/2
    J = kernels.uniform_kernel(1.0)
    sp = spectral.critical_speed(J, 1.0, 1.0)
    lam_oracle = brentq(lambda t: math.tanh(t) - t / 2.0, 1.0, 3.0,
                        xtol=1e-14)
    assert sp.lam_crit == pytest.approx(lam_oracle, abs=1e-10)
    assert sp.s_crit == pytest.approx(0.9052617393690583, abs=1e-12)
    # stationarity identity s = d I'(lam)
    assert sp.s_crit == pytest.approx(
        kernels.mgf_derivative(J, sp.lam_crit), abs=1e-10)


def test_critical_speed_matches_direct_minimization():
    for J, d, rc in [
        (kernels.laplace_kernel(3.0), 0.7, 1.3),
        (kernels.gaussian_kernel(0.6), 1.5, 0.4),
        (kernels.uniform_kernel(2.0), 1.0, 0.25),
    ]:
        sp = spectral.critical_speed(J, d, rc)

        def Q(lam):
            return float(spectral.speed_functional(J, d, rc, lam))

        res = minimize_scalar(Q, bracket=(0.5 * sp.lam_crit,
                                          sp.lam_crit,
                                          1.5 * sp.lam_crit),
                              options={"xtol": 1e-12})
        assert sp.s_crit == pytest.approx(res.fun, rel=1e-10)
        assert sp.lam_crit == pytest.approx(res.x, rel=1e-6)


def test_char_roots_bracket_argmin_and_vanish():
    J = kernels.uniform_kernel(1.0)
    sp = spectral.critical_speed(J, 1.0, 1.0)
    cf = spectral.CharFunction(kernel=J, d=1.0, s=1.2 * sp.s_crit, rc=1.0)
    lam_low, lam_high = spectral.char_roots(cf)
    assert 0 < lam_low < sp.lam_crit < lam_high
    assert abs(cf(lam_low)) < 1e-12
    assert abs(cf(lam_high)) < 1e-12
    # g < 0 strictly between the roots
    mid = np.linspace(lam_low + 1e-3, lam_high - 1e-3, 50)
    assert np.all(cf(mid) < 0)


def test_char_roots_error_cases():
    J = kernels.uniform_kernel(1.0)
    sp = spectral.critical_speed(J, 1.0, 1.0)
    with pytest.raises(spectral.NoRootsError):
        spectral.char_roots(spectral.CharFunction(J, 1.0, 0.5 * sp.s_crit,
                                                  1.0))
    with pytest.raises(spectral.TangencyError):
        spectral.char_roots(spectral.CharFunction(J, 1.0, sp.s_crit, 1.0))


def test_speed_functional_values():
    J = kernels.uniform_kernel(1.0)
    lam = 1.0
    expected = (math.sinh(1.0) - 1.0 + 1.0) / 1.0
    assert float(spectral.speed_functional(J, 1.0, 1.0, lam)) \
        == pytest.approx(expected, rel=1e-14)
    vec = spectral.speed_functional(J, 1.0, 1.0, np.array([0.5, 1.0, 2.0]))
    assert vec.shape == (3,)


def test_lambda0_pick_properties():
    J = kernels.uniform_kernel(1.0)
    # prey-row characteristic function: rc = 0, so g3(0) = 0, g3'(0) = -s
    cf3 = spectral.CharFunction(kernel=J, d=1.0, s=1.1, rc=0.0)
    uppers = [0.8, 1.4]
    lam0 = spectral.lambda0_pick(cf3, uppers)
    assert 0 < lam0 < min(uppers)
    assert cf3(lam0) < 0
    with pytest.raises(ValueError):
        spectral.lambda0_pick(cf3, [])
    with pytest.raises(ValueError):
        spectral.lambda0_pick(cf3, [-1.0])


def test_mixed_coefficient_frozen_speed():
    # second predator invading the u-established state at base parameters:
    # rc = r2 * beta2 with beta2 = (a-1)(1-h)/(ab+1) at (2,0.1,0.5,0.5)
    J = kernels.uniform_kernel(1.0)
    rc = 0.5 / 1.2
    sp = spectral.critical_speed(J, 1.0, rc)
    assert sp.s_crit == pytest.approx(0.5548519608678283, abs=1e-12)
    assert sp.lam_crit == pytest.approx(1.3819689360709102, abs=1e-10)
