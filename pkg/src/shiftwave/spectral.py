"""Characteristic functions, their roots, and critical spreading speeds.

For a kernel with moment generating function I(lambda), diffusion d, speed
s and zeroth-order coefficient rc, the characteristic function is

    g(lambda) = d [I(lambda) - 1] - s lambda + rc.

The associated speed functional Q(lambda) = (d [I(lambda) - 1] + rc) / lambda
diverges at both ends of (0, lambda_hat) and has a unique interior minimum
(s_crit, lambda_crit); g has two positive roots exactly when s > s_crit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import kernels as _kern


class NoRootsError(ValueError):
    """The characteristic function has no positive real roots (s < s_crit)."""


class TangencyError(ValueError):
    """s is at the critical value: double root, ill-conditioned."""


@dataclass(frozen=True)
class CharFunction:
    kernel: object
    d: float
    s: float
    rc: float

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        return self.d * (_mgf(self.kernel, lam) - 1.0) - self.s * lam + self.rc

    def derivative(self, lam):
        return self.d * _kern.mgf_derivative(self.kernel, lam) - self.s


@dataclass(frozen=True)
class SpeedResult:
    s_crit: float
    lam_crit: float
    d: float
    rc: float
    lam_grid: tuple
    Q_vals: tuple


def _mgf(kernel, lam):
    """Elementwise MGF (the kernel MGF itself is scalar-only)."""
    lam = np.asarray(lam, dtype=float)
    if lam.ndim == 0:
        return _kern.mgf(kernel, float(lam))
    return np.array([_kern.mgf(kernel, t) for t in lam.ravel()]).reshape(lam.shape)


def speed_functional(kernel, d, rc, lam):
    """Q(lambda) = (d [I(lambda) - 1] + rc) / lambda."""
    lam = np.asarray(lam, dtype=float)
    return (d * (_mgf(kernel, lam) - 1.0) + rc) / lam


def _stationarity_gap(kernel, d, rc, lam):
    """lambda^2 Q'(lambda): negative left of the minimum, positive right."""
    return d * _kern.mgf_derivative(kernel, lam) * lam - (
        d * (_kern.mgf(kernel, lam) - 1.0) + rc)


def _toward_hat(lam, lam_hat):
    """One geometric step of lam toward the right end of the MGF domain."""
    if np.isinf(lam_hat):
        return 2.0 * lam
    return lam_hat - 0.5 * (lam_hat - lam)


def critical_speed(kernel, d, rc):
    """Minimize Q over (0, lambda_hat).

    Returns a SpeedResult whose (s_crit, lam_crit) satisfy the stationarity
    identity s_crit = d I'(lam_crit).
    """
    if d <= 0 or rc <= 0:
        raise ValueError("critical_speed requires d > 0 and rc > 0")
    lam_hat = kernel.mgf_domain[1]

    # The stationarity gap lambda^2 Q' is increasing, negative near 0, and
    # diverges near lambda_hat: bracket its sign change geometrically.
    hi = 1.0 if np.isinf(lam_hat) else 0.5 * lam_hat
    for _ in range(200):
        if _stationarity_gap(kernel, d, rc, hi) > 0:
            break
        hi = _toward_hat(hi, lam_hat)
    else:
        raise RuntimeError("failed to bracket the minimum of the speed functional")
    lo = hi
    for _ in range(200):
        lo *= 0.5
        if _stationarity_gap(kernel, d, rc, lo) < 0:
            break
    else:
        raise RuntimeError("failed to bracket the minimum of the speed functional")

    lam_crit = brentq(lambda t: _stationarity_gap(kernel, d, rc, t), lo, hi,
                      xtol=1e-14, rtol=8.9e-16)
    s_crit = float(speed_functional(kernel, d, rc, lam_crit))

    # sampled curve for reporting/plotting
    g_hi = min(50.0 * lam_crit, lam_crit + 0.98 * (lam_hat - lam_crit)) \
        if not np.isinf(lam_hat) else 50.0 * lam_crit
    grid = np.geomspace(lam_crit / 50.0, g_hi, 200)
    Q_vals = speed_functional(kernel, d, rc, grid)
    return SpeedResult(s_crit=s_crit, lam_crit=float(lam_crit), d=float(d),
                       rc=float(rc), lam_grid=tuple(grid), Q_vals=tuple(Q_vals))


def char_roots(cf, tangency_rtol=1e-9):
    """Two positive roots (lam_low, lam_high) of g, bracketing the argmin.

    Raises NoRootsError if s < s_crit and TangencyError if s is within the
    relative tolerance of s_crit (double root).
    """
    sp = critical_speed(cf.kernel, cf.d, cf.rc)
    gap = cf.s - sp.s_crit
    if abs(gap) <= tangency_rtol * (1.0 + sp.s_crit):
        raise TangencyError(
            f"s={cf.s} within tangency tolerance of s_crit={sp.s_crit}; "
            f"double root at lambda={sp.lam_crit}")
    if gap < 0:
        raise NoRootsError(f"s={cf.s} below critical speed {sp.s_crit}: no real roots")

    lam_hat = cf.kernel.mgf_domain[1]
    # g(lam_crit) = (s_crit - s) lam_crit < 0; g(0+) = rc > 0; g -> +inf right.
    lo = sp.lam_crit
    for _ in range(200):
        lo *= 0.5
        if cf(lo) > 0:
            break
    else:
        raise RuntimeError("failed to bracket the lower characteristic root")
    lam_low = brentq(cf, lo, sp.lam_crit, xtol=1e-14, rtol=8.9e-16)

    hi = sp.lam_crit
    for _ in range(200):
        hi = _toward_hat(hi, lam_hat)
        if cf(hi) > 0:
            break
    else:
        raise RuntimeError("failed to bracket the upper characteristic root")
    lam_high = brentq(cf, sp.lam_crit, hi, xtol=1e-14, rtol=8.9e-16)
    return float(lam_low), float(lam_high)


def lambda0_pick(cf_g3, uppers, theta=0.5):
    """Small positive lambda_0 strictly below min(uppers) with g_3(lambda_0)<0.

    Existence is guaranteed because g_3(0)=0 and g_3'(0) = -s < 0; the
    candidate theta*min(uppers) is halved until the sign condition holds.
    """
    uppers = [float(u) for u in uppers]
    if not uppers or min(uppers) <= 0:
        raise ValueError("uppers must be a nonempty list of positive reals")
    lam0 = theta * min(uppers)
    while lam0 >= 1e-12:
        if cf_g3(lam0) < 0:
            return float(lam0)
        lam0 *= 0.5
    raise RuntimeError("no admissible lambda_0 found; kernel/speed inputs inconsistent")
