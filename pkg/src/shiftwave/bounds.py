"""Upper/lower solution pairs for the traveling-wave system.

A pair of upper solutions (ub_1, ub_2, ub_3) and lower solutions
(lb_1, lb_2, lb_3) sandwiches a wave profile when the six expressions

    U_i = d_i N_i[ub_i] + s ub_i' + r_i ub_i * (reaction with cross terms
          taken at the lower profiles where they help the inequality)
    L_i = d_i N_i[lb_i] + s lb_i' + r_i lb_i * (cross terms at the uppers)

satisfy U_i <= 0 and L_i >= 0 off a finite kink set, where
N[f](z) = int J(y) f(z-y) dy - f(z) is the dispersal increment.

Each builder follows an ordered recipe: characteristic roots first, then
the small decay rate lambda_0, then interior decay rates, then the
amplitude constants (with a 1.1 safety factor on every "large enough"
constant), then epsilon and the translation that makes the habitat
envelope alpha(z) >= 1 - eps e^{-rho z} hold globally.  The translation
is applied to the profiles (all formulas use zeta = z - A), so the
environment itself is never shifted.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq

from . import environment as _envmod
from . import equilibria, spectral
from . import kernels as _kern


class RegimeError(ValueError):
    """Inputs violate a sufficient condition required by the construction."""


# ---------------------------------------------------------------------------
# Profile representation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Profile:
    """Piecewise-smooth profile with an analytic derivative off its kinks."""
    fn: object
    dfn: object
    kinks: tuple

    def __call__(self, z):
        return self.fn(z)


@dataclass(frozen=True)
class BoundPair:
    uppers: tuple
    lowers: tuple
    regime: str
    params: dict

    @property
    def kinks(self):
        ks = []
        for p in (*self.uppers, *self.lowers):
            ks.extend(p.kinks)
        return tuple(sorted(set(ks)))

    def profile_table(self, z):
        """Array of shape (len(z), 7): z and the six profiles."""
        z = np.asarray(z, dtype=float)
        cols = [z]
        for p in (*self.uppers, *self.lowers):
            cols.append(p.fn(z))
        return np.column_stack(cols)


def _piecewise(A, zk, left, right, dleft, dright):
    """Profile equal to left(zeta) for zeta <= zk and right(zeta) beyond,
    with zeta = z - A.  left/right may be floats (constant branches); the
    branches are only evaluated on their own side, so expressions that
    would overflow on the other side are safe."""
    def _branch(val):
        if callable(val):
            return val
        c = float(val)
        return lambda t, c=c: np.full(t.shape, c)

    fl, fr, dl, dr = _branch(left), _branch(right), _branch(dleft), _branch(dright)

    def make(f_left, f_right):
        def f(z):
            zeta = np.asarray(z, dtype=float) - A
            scalar = zeta.ndim == 0
            zeta = np.atleast_1d(zeta)
            out = np.empty_like(zeta)
            m = zeta > zk
            out[~m] = f_left(zeta[~m])
            out[m] = f_right(zeta[m])
            return float(out[0]) if scalar else out
        return f

    return Profile(fn=make(fl, fr), dfn=make(dl, dr), kinks=(float(A + zk),))


def _const_profile(c):
    c = float(c)

    def fn(z):
        z = np.asarray(z, dtype=float)
        out = np.full(z.shape, c)
        return float(c) if z.ndim == 0 else out

    def dfn(z):
        z = np.asarray(z, dtype=float)
        return 0.0 if z.ndim == 0 else np.zeros(z.shape)

    return Profile(fn=fn, dfn=dfn, kinks=())


def _sat_exp(A, base, amp, lam):
    """min(base + amp e^{-lam zeta}, base + amp): constant left of zeta=0."""
    return _piecewise(
        A, 0.0,
        base + amp,
        lambda t: base + amp * np.exp(-lam * t),
        0.0,
        lambda t: -lam * amp * np.exp(-lam * t))


def _rise_exp(A, level, lam, z_on):
    """max(level (1 - e^{-lam (zeta - z_on)}), 0)."""
    return _piecewise(
        A, z_on,
        0.0,
        lambda t: level * (1.0 - np.exp(-lam * (t - z_on))),
        0.0,
        lambda t: level * lam * np.exp(-lam * (t - z_on)))


def _gap_exp(A, amp, lam, p, mu):
    """max(amp e^{-lam zeta} - p e^{-mu zeta}, 0), positive past its kink."""
    zk = np.log(p / amp) / (mu - lam)
    return _piecewise(
        A, zk,
        0.0,
        lambda t: amp * np.exp(-lam * t) - p * np.exp(-mu * t),
        0.0,
        lambda t: -lam * amp * np.exp(-lam * t) + mu * p * np.exp(-mu * t))


def _bz_upper(A, left_const, base, coef, B, lam, z1):
    """left_const for zeta <= z1, else base + coef B zeta e^{-lam zeta}."""
    return _piecewise(
        A, z1,
        left_const,
        lambda t: base + coef * B * t * np.exp(-lam * t),
        0.0,
        lambda t: coef * B * (1.0 - lam * t) * np.exp(-lam * t))


def _bz_lower_sqrt(A, ampB, p, lam, zk):
    """0 for zeta <= zk, else ampB zeta e^{-lam zeta} - p sqrt(zeta) e^{-lam zeta}."""
    return _piecewise(
        A, zk,
        0.0,
        lambda t: (ampB * t - p * np.sqrt(t)) * np.exp(-lam * t),
        0.0,
        lambda t: np.exp(-lam * t) * (ampB * (1.0 - lam * t)
                                      - p * (0.5 / np.sqrt(t) - lam * np.sqrt(t))))


def _bz_drop(A, level, B, lam, z1):
    """0 for zeta <= z1, else level (1 - B zeta e^{-lam zeta})."""
    return _piecewise(
        A, z1,
        0.0,
        lambda t: level * (1.0 - B * t * np.exp(-lam * t)),
        0.0,
        lambda t: -level * B * (1.0 - lam * t) * np.exp(-lam * t))


# ---------------------------------------------------------------------------
# Selection helpers
# ---------------------------------------------------------------------------

_SAFETY = 1.1


def _geomean(lo, hi):
    """Strictly interior point of (lo, hi), scale-aware."""
    if not lo < hi:
        raise RegimeError(f"empty selection interval ({lo}, {hi})")
    return float(np.sqrt(lo * hi))


def _require_unit_plus(env):
    if abs(env.alpha_plus - 1.0) > 1e-12:
        raise RegimeError(
            "environment must be normalized to alpha(+inf) = 1 "
            "(use environment.normalized_to_unit_plus)")


def _translation(env, eps):
    return float(_envmod.required_translation(env, eps))


def _max_over_grid(f, zmax, n=400001):
    """max of f over [0, zmax]; asserts f is decreasing over the last
    quarter of the window so the window provably contains the max."""
    z = np.linspace(0.0, zmax, n)
    vals = f(z)
    tail = vals[3 * n // 4:]
    if np.max(np.diff(tail)) > 1e-12 * (1.0 + np.max(np.abs(tail))):
        raise RuntimeError("max-over-z window too small: integrand still rising")
    i = int(np.argmax(vals))
    return float(vals[i]), float(z[i])


def _bz_kink_roots(lam, B):
    """Roots z' < 1/lam < z of z e^{-lam z} = 1/B (requires B > lam e)."""
    target = 1.0 / B

    def f(z):
        return z * np.exp(-lam * z) - target

    lo = brentq(f, 1e-300, 1.0 / lam, xtol=1e-15)
    hi = 2.0 / lam
    while f(hi) > 0:
        hi *= 2.0
    hi = brentq(f, 1.0 / lam, hi, xtol=1e-14)
    return float(lo), float(hi)


def _choose_B(lams, S):
    """Smallest doubling of 1.1 max(lam e) separating the two kink roots
    of z e^{-lam z} = 1/B by more than S for every rate in lams."""
    B = _SAFETY * max(lam * np.e for lam in lams)
    for _ in range(200):
        roots = {lam: _bz_kink_roots(lam, B) for lam in lams}
        if all(zr - zl > S for zl, zr in roots.values()):
            return float(B), roots
        B *= 2.0
    raise RuntimeError("failed to separate kink roots; kernel support too wide?")


def _choose_z0(lhs, z_min, gap):
    """Smallest z0 > z_min with lhs(z) <= e^{-lambda_0 (z - z0)} on [z0, inf).

    lhs must be a sum of terms c z e^{-lam z} / c e^{-lam z} with every
    lam > lambda_0; gap = min(lam) - lambda_0 > 0, so beyond 1/gap the
    ratio lhs(z) e^{lambda_0 z} is decreasing and the condition reduces
    to lhs(z0) <= 1 (enforced with margin 0.9)."""
    z0 = max(z_min * 1.01 + 0.1, 1.0 / gap)
    for _ in range(100000):
        if lhs(np.asarray(z0)) <= 0.9:
            return float(z0)
        z0 += 1.0
    raise RuntimeError("failed to satisfy the prey-domination inequality")


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def build_bounds_E1(params, env, kernels, p1_override=None):
    """Supercritical pair sandwiching a wave to the predator-free state.

    p1_override replaces the selected p_1 (bypassing its sufficiency rule);
    it exists so tests can demonstrate that undersized constants break the
    lower inequality.
    """
    params.validate()
    _require_unit_plus(env)
    J1, J2, J3 = kernels
    a, k, h = params.a, params.k, params.h
    s = params.s

    g1 = spectral.CharFunction(J1, params.d1, s, params.r1 * (a - 1.0))
    g2 = spectral.CharFunction(J2, params.d2, s, params.r2 * (a - 1.0))
    g3 = spectral.CharFunction(J3, params.d3, s, 0.0)
    try:
        lam1, lam2 = spectral.char_roots(g1)
        lam3, lam4 = spectral.char_roots(g2)
    except (spectral.NoRootsError, spectral.TangencyError) as exc:
        raise RegimeError(f"speed not supercritical for both predators: {exc}")

    lam_hat3 = J3.mgf_domain[1]
    lam0 = spectral.lambda0_pick(g3, [lam1, lam3, env.rho, lam_hat3])

    mu1 = _geomean(lam1, min(lam2, lam1 + lam0))
    p1 = _SAFETY * max(a - 1.0,
                       params.r1 * (a - 1.0) * (2.0 * a - 1.0 + k * (a - 1.0))
                       / (-g1(mu1)))
    if p1_override is not None:
        p1 = float(p1_override)
    mu2 = _geomean(lam3, min(lam4, lam3 + lam0))
    p2 = _SAFETY * max(a - 1.0,
                       params.r2 * (a - 1.0) * (2.0 * a - 1.0 + h * (a - 1.0))
                       / (-g2(mu2)))

    eps = 0.5 * (-float(g3(lam0))) / params.r3
    A = _translation(env, eps)
    z1 = np.log(p1 / (a - 1.0)) / (mu1 - lam1)
    z2 = np.log(p2 / (a - 1.0)) / (mu2 - lam3)

    uppers = (
        _sat_exp(A, 0.0, a - 1.0, lam1),
        _sat_exp(A, 0.0, a - 1.0, lam3),
        _const_profile(1.0),
    )
    lowers = (
        _gap_exp(A, a - 1.0, lam1, p1, mu1),
        _gap_exp(A, a - 1.0, lam3, p2, mu2),
        _rise_exp(A, 1.0, lam0, 0.0),
    )
    rec = {
        "regime": "e1", "s": s,
        "lambda_1": lam1, "lambda_2": lam2, "lambda_3": lam3, "lambda_4": lam4,
        "lambda_0": lam0, "mu_1": mu1, "mu_2": mu2, "p_1": p1, "p_2": p2,
        "z_1": float(z1), "z_2": float(z2),
        "eps": eps, "rho": env.rho, "A": A,
        "right_state": (0.0, 0.0, 1.0),
    }
    return BoundPair(uppers=uppers, lowers=lowers, regime="e1", params=rec)


def build_bounds_E2(params, env, kernels):
    """Pair sandwiching a wave to the single-predator state."""
    params.validate()
    _require_unit_plus(env)
    J1, J2, J3 = kernels
    a, b, h = params.a, params.b, params.h
    s = params.s
    st = equilibria.compute_states(params)
    u_p, w_p, beta2 = st.u_p, st.w_p, st.beta2

    if max(params.d1, params.d3) > params.d2:
        raise RegimeError("requires max(d1, d3) <= d2")
    if not (J1 == J2 == J3):
        raise RegimeError("requires identical dispersal kernels")
    if params.r1 * (1.0 + params.k * (a - 1.0)) > params.r2 * beta2:
        raise RegimeError("requires r1 [1 + k(a-1)] <= r2 beta2")

    G2 = spectral.CharFunction(J2, params.d2, s, params.r2 * beta2)
    try:
        lam5, lam6 = spectral.char_roots(G2)
    except (spectral.NoRootsError, spectral.TangencyError) as exc:
        raise RegimeError(f"speed not above the mixed critical speed: {exc}")
    rho = env.rho
    if rho >= J2.mgf_domain[1]:
        raise RegimeError("environment decay rate outside the kernel MGF domain")
    R2_rho = float(spectral.speed_functional(J2, params.d2, params.r2 * beta2, rho))
    if s < R2_rho * (1.0 - 1e-12):
        raise RegimeError(f"requires s >= R2(rho) = {R2_rho}")

    nu = _geomean(lam5, min(lam6, 2.0 * lam5))
    q = _SAFETY * max(a - 1.0,
                      params.r2 * (a - 1.0) * ((1.0 + h) * (a - 1.0) + a * w_p)
                      / (-G2(nu)))
    eps = 0.5 * params.r2 * beta2 / params.r3
    A = _translation(env, eps)
    A_amp = a - 1.0 - u_p
    z_q = np.log(q / (a - 1.0)) / (nu - lam5)

    uppers = (
        _sat_exp(A, u_p, A_amp, lam5),
        _sat_exp(A, 0.0, a - 1.0, lam5),
        _sat_exp(A, w_p, b * u_p, lam5),
    )
    lowers = (
        _rise_exp(A, u_p, lam5, 0.0),
        _gap_exp(A, a - 1.0, lam5, q, nu),
        _rise_exp(A, w_p, lam5, 0.0),
    )
    rec = {
        "regime": "e2", "s": s,
        "lambda_5": lam5, "lambda_6": lam6, "nu": nu, "q": q,
        "A_amp": A_amp, "z_q": float(z_q), "R2_rho": R2_rho,
        "eps": eps, "rho": rho, "A": A,
        "u_p": u_p, "w_p": w_p, "beta_2": beta2,
        "right_state": (u_p, 0.0, w_p),
    }
    return BoundPair(uppers=uppers, lowers=lowers, regime="e2", params=rec)


def build_bounds_E4(params, env, kernels, scalar_solver):
    """Pair sandwiching a co-existence wave: constant uppers and a cascade
    of scalar forced waves as lowers.

    scalar_solver(kernel, d, r, s, alpha_fn, alpha_plus, rho) must return
    an object with vectorized fn/dfn attributes and an `envelope` pair
    (amplitude, rate) such that fn >= alpha_plus - amplitude e^{-rate z}.
    """
    params.validate()
    _require_unit_plus(env)
    J1, J2, J3 = kernels
    a, b, h, k = params.a, params.b, params.h, params.k

    b_cap = min((1.0 - h) / (2.0 * a), (1.0 - k) / (2.0 * a))
    if b >= b_cap:
        raise RegimeError(f"requires b < min((1-h)/(2a), (1-k)/(2a)) = {b_cap}")

    gam3 = 1.0 - 2.0 * b * (a - 1.0)
    gam2 = (1.0 - h - 2.0 * a * b) * (a - 1.0)
    gam1 = (1.0 - k - 2.0 * a * b) * (a - 1.0)

    wave3 = scalar_solver(J3, params.d3, params.r3, params.s,
                          lambda z: env.evaluate(z) - 2.0 * b * (a - 1.0),
                          gam3, env.rho)
    rho3 = min(env.rho, wave3.envelope[1])
    wave2 = scalar_solver(J2, params.d2, params.r2, params.s,
                          lambda z: a * wave3.fn(z) - 1.0 - h * (a - 1.0),
                          gam2, rho3)
    wave1 = scalar_solver(J1, params.d1, params.r1, params.s,
                          lambda z: a * wave3.fn(z) - 1.0 - k * (a - 1.0),
                          gam1, rho3)

    uppers = (_const_profile(a - 1.0), _const_profile(a - 1.0), _const_profile(1.0))
    lowers = tuple(Profile(fn=w.fn, dfn=w.dfn, kinks=()) for w in (wave1, wave2, wave3))
    rec = {
        "regime": "e4", "s": params.s,
        "gamma_1": gam1, "gamma_2": gam2, "gamma_3": gam3,
        "rho": env.rho, "A": 0.0, "eps": float("nan"),
        "right_state": (gam1, gam2, gam3),
    }
    return BoundPair(uppers=uppers, lowers=lowers, regime="e4", params=rec)


def build_bounds_critical(params, env, kernels, case):
    """Critical-speed pairs; case is one of 'equal_speeds', 's1_dominant',
    'E2_critical'."""
    params.validate()
    _require_unit_plus(env)
    if case == "equal_speeds":
        return _critical_equal_speeds(params, env, kernels)
    if case == "s1_dominant":
        return _critical_s1_dominant(params, env, kernels)
    if case == "E2_critical":
        return _critical_e2(params, env, kernels)
    raise ValueError(f"unknown critical case {case!r}")


def _require_speed_matches(s, s_crit, label):
    if abs(s - s_crit) > 1e-9 * (1.0 + s_crit):
        raise RegimeError(f"s={s} must equal the critical speed {label}={s_crit}")


def _eps_exp_rule(g3, lam0, z0, r3):
    """eps with e^{lambda_0 z_0} g_3(lambda_0) + eps r_3 < 0, capped at 1."""
    bound = -float(g3(lam0)) * np.exp(lam0 * z0) / r3
    return float(min(0.5 * bound, 1.0))


def _critical_equal_speeds(params, env, kernels):
    J1, J2, J3 = kernels
    a, b, h, k = params.a, params.b, params.h, params.k
    if J1.support is None or J2.support is None:
        raise RegimeError("both predator kernels must be compactly supported")
    S = max(J1.support, J2.support)

    sp1 = spectral.critical_speed(J1, params.d1, params.r1 * (a - 1.0))
    sp2 = spectral.critical_speed(J2, params.d2, params.r2 * (a - 1.0))
    if abs(sp1.s_crit - sp2.s_crit) > 1e-9 * (1.0 + sp1.s_crit):
        raise RegimeError("predator critical speeds differ; use case 's1_dominant'")
    s = params.s
    _require_speed_matches(s, sp1.s_crit, "s*_1 = s*_2")
    ls1, ls2 = sp1.lam_crit, sp2.lam_crit

    g3 = spectral.CharFunction(J3, params.d3, s, 0.0)
    lam0 = spectral.lambda0_pick(g3, [ls1, ls2, env.rho, J3.mgf_domain[1]])

    B, roots = _choose_B([ls1, ls2], S)
    z1p, z1 = roots[ls1]
    z2p, z2 = roots[ls2]

    def lhs(z):
        return b * (a - 1.0) * B * z * (np.exp(-ls1 * z) + np.exp(-ls2 * z))

    z0 = _choose_z0(lhs, max(z1, z2), min(ls1, ls2) - lam0)
    zwin = z0 + 60.0 / lam0 + 60.0 / min(ls1, ls2)

    def bracket(z, lam_own, lam_other, cross):
        return (z + S) ** 1.5 * (
            (a - 1.0) * B * z * z * (np.exp(-lam_own * z) + cross * np.exp(-lam_other * z))
            + a * z * np.exp(-lam0 * (z - z0)))

    m3, _ = _max_over_grid(lambda z: bracket(z, ls1, ls2, k), zwin)
    p3 = _SAFETY * 8.0 * params.r1 * B * (a - 1.0) * m3 \
        / (params.d1 * _kern.exp_moment(J1, ls1, 2))
    p3 = max(p3, _SAFETY * (a - 1.0) * B * np.sqrt(z0))
    z3 = (p3 / ((a - 1.0) * B)) ** 2

    m4, _ = _max_over_grid(lambda z: bracket(z, ls2, ls1, h), zwin)
    p4 = _SAFETY * 8.0 * params.r2 * B * (a - 1.0) * m4 \
        / (params.d2 * _kern.exp_moment(J2, ls2, 2))
    p4 = max(p4, _SAFETY * (a - 1.0) * B * np.sqrt(z0))
    z4 = (p4 / ((a - 1.0) * B)) ** 2

    eps = _eps_exp_rule(g3, lam0, z0, params.r3)
    A = _translation(env, eps)

    uppers = (
        _bz_upper(A, a - 1.0, 0.0, a - 1.0, B, ls1, z1),
        _bz_upper(A, a - 1.0, 0.0, a - 1.0, B, ls2, z2),
        _const_profile(1.0),
    )
    lowers = (
        _bz_lower_sqrt(A, (a - 1.0) * B, p3, ls1, z3),
        _bz_lower_sqrt(A, (a - 1.0) * B, p4, ls2, z4),
        _rise_exp(A, 1.0, lam0, z0),
    )
    rec = {
        "regime": "critical_equal_speeds", "s": s,
        "lambda_star_1": ls1, "lambda_star_2": ls2, "lambda_0": lam0,
        "B": B, "S": S, "z_1": z1, "z_1_prime": z1p, "z_2": z2,
        "z_2_prime": z2p, "z_0": z0, "p_3": p3, "z_3": float(z3),
        "p_4": p4, "z_4": float(z4),
        "eps": eps, "rho": env.rho, "A": A,
        "right_state": (0.0, 0.0, 1.0),
    }
    return BoundPair(uppers=uppers, lowers=lowers,
                     regime="critical_equal_speeds", params=rec)


def _critical_s1_dominant(params, env, kernels):
    J1, J2, J3 = kernels
    a, b, h, k = params.a, params.b, params.h, params.k
    if J1.support is None:
        raise RegimeError("first predator kernel must be compactly supported")
    S = J1.support

    sp1 = spectral.critical_speed(J1, params.d1, params.r1 * (a - 1.0))
    sp2 = spectral.critical_speed(J2, params.d2, params.r2 * (a - 1.0))
    if not sp1.s_crit > sp2.s_crit + 1e-9 * (1.0 + sp1.s_crit):
        raise RegimeError("requires s*_1 > s*_2 strictly; use case 'equal_speeds'")
    s = params.s
    _require_speed_matches(s, sp1.s_crit, "s*_1")
    ls1 = sp1.lam_crit

    g2 = spectral.CharFunction(J2, params.d2, s, params.r2 * (a - 1.0))
    lam3, lam4 = spectral.char_roots(g2)
    g3 = spectral.CharFunction(J3, params.d3, s, 0.0)
    lam0 = spectral.lambda0_pick(g3, [ls1, lam3, env.rho, J3.mgf_domain[1]])
    mu3 = _geomean(lam3, min(lam4, lam3 + lam0))

    B, roots = _choose_B([ls1], S)
    z1p, z1 = roots[ls1]

    def lhs(z):
        return b * (a - 1.0) * (B * z * np.exp(-ls1 * z) + np.exp(-lam3 * z))

    z0 = _choose_z0(lhs, z1, min(ls1, lam3) - lam0)
    zwin = z0 + 60.0 / lam0 + 60.0 / min(ls1, lam3)

    def bracket5(z):
        return (z + S) ** 1.5 * (
            (a - 1.0) * B * z * z * np.exp(-ls1 * z)
            + k * (a - 1.0) * z * np.exp(-lam3 * z)
            + a * z * np.exp(-lam0 * (z - z0)))

    m5, _ = _max_over_grid(bracket5, zwin)
    p5 = _SAFETY * 8.0 * params.r1 * (a - 1.0) * B * m5 \
        / (params.d1 * _kern.exp_moment(J1, ls1, 2))
    p5 = max(p5, _SAFETY * (a - 1.0) * B * np.sqrt(z0))
    z5 = (p5 / ((a - 1.0) * B)) ** 2

    def bracket6(z):
        return (h * (a - 1.0) * B * z * np.exp(-(ls1 + lam3 - mu3) * z)
                + (a - 1.0) * np.exp(-(2.0 * lam3 - mu3) * z)
                + a * np.exp(lam0 * z0) * np.exp(-(lam3 + lam0 - mu3) * z))

    P6, _ = _max_over_grid(bracket6, zwin)
    p6 = _SAFETY * max(a - 1.0, params.r2 * (a - 1.0) * P6 / (-float(g2(mu3))))
    p6 = max(p6, (a - 1.0) * np.exp((mu3 - lam3) * z0 * _SAFETY))
    z6 = np.log(p6 / (a - 1.0)) / (mu3 - lam3)

    eps = _eps_exp_rule(g3, lam0, z0, params.r3)
    A = _translation(env, eps)

    uppers = (
        _bz_upper(A, a - 1.0, 0.0, a - 1.0, B, ls1, z1),
        _sat_exp(A, 0.0, a - 1.0, lam3),
        _const_profile(1.0),
    )
    lowers = (
        _bz_lower_sqrt(A, (a - 1.0) * B, p5, ls1, z5),
        _gap_exp(A, a - 1.0, lam3, p6, mu3),
        _rise_exp(A, 1.0, lam0, z0),
    )
    rec = {
        "regime": "critical_s1_dominant", "s": s,
        "lambda_star_1": ls1, "lambda_3": lam3, "lambda_4": lam4,
        "lambda_0": lam0, "mu_3": mu3,
        "B": B, "S": S, "z_1": z1, "z_1_prime": z1p, "z_0": z0,
        "p_5": p5, "z_5": float(z5), "p_6": p6, "z_6": float(z6),
        "eps": eps, "rho": env.rho, "A": A,
        "right_state": (0.0, 0.0, 1.0),
    }
    return BoundPair(uppers=uppers, lowers=lowers,
                     regime="critical_s1_dominant", params=rec)


def _critical_e2(params, env, kernels):
    J1, J2, J3 = kernels
    a, b = params.a, params.b
    st = equilibria.compute_states(params)
    u_p, w_p, beta2 = st.u_p, st.w_p, st.beta2

    if not (params.d1 == params.d2 == params.d3):
        raise RegimeError("requires equal diffusion rates")
    if not (J1 == J2 == J3):
        raise RegimeError("requires identical dispersal kernels")
    if J2.support is None:
        raise RegimeError("requires a compactly supported kernel")
    if params.r1 * (1.0 + params.k * (a - 1.0)) > params.r2 * beta2:
        raise RegimeError("requires r1 [1 + k(a-1)] <= r2 beta2")
    S = J2.support

    spm = spectral.critical_speed(J2, params.d2, params.r2 * beta2)
    s = params.s
    _require_speed_matches(s, spm.s_crit, "s**_2")
    lss = spm.lam_crit
    if env.rho < lss:
        raise RegimeError("requires rho >= the mixed critical decay rate")

    B, roots = _choose_B([lss], S)
    z2s, z1 = roots[lss]

    def bracket(z):
        return (z + S) ** 1.5 * z * z * np.exp(-lss * z)

    mq, _ = _max_over_grid(bracket, z1 + 60.0 / lss)
    q_star = _SAFETY * 8.0 * params.r2 * (a - 1.0) * (2.0 * a - 1.0) * B * B * mq \
        / (params.d2 * _kern.exp_moment(J2, lss, 2))
    q_star = max(q_star, _SAFETY * (a - 1.0) * B * np.sqrt(z1))
    z_star = (q_star / ((a - 1.0) * B)) ** 2

    eps = 0.5 * params.r2 * beta2 / params.r3
    A = _translation(env, eps)
    A_amp = a - 1.0 - u_p

    uppers = (
        _bz_upper(A, a - 1.0, u_p, A_amp, B, lss, z1),
        _bz_upper(A, a - 1.0, 0.0, a - 1.0, B, lss, z1),
        _bz_upper(A, 1.0, w_p, b * u_p, B, lss, z1),
    )
    lowers = (
        _bz_drop(A, u_p, B, lss, z1),
        _bz_lower_sqrt(A, (a - 1.0) * B, q_star, lss, z_star),
        _bz_drop(A, w_p, B, lss, z1),
    )
    rec = {
        "regime": "critical_e2", "s": s,
        "lambda_star_star_2": lss, "B": B, "S": S,
        "z_1": z1, "z_2": z2s, "q_star": q_star, "z_star": float(z_star),
        "A_amp": A_amp, "eps": eps, "rho": env.rho, "A": A,
        "u_p": u_p, "w_p": w_p, "beta_2": beta2,
        "right_state": (u_p, 0.0, w_p),
    }
    return BoundPair(uppers=uppers, lowers=lowers,
                     regime="critical_e2", params=rec)


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _gl_nodes(n=24):
    return leggauss(n)


def _gl_panels(edges, max_width=0.5, n=24):
    x, w = _gl_nodes(n)
    nodes, weights = [], []
    for a0, b0 in zip(edges[:-1], edges[1:]):
        m = max(1, int(np.ceil((b0 - a0) / max_width)))
        sub = np.linspace(a0, b0, m + 1)
        for aa, bb in zip(sub[:-1], sub[1:]):
            c, hw = 0.5 * (aa + bb), 0.5 * (bb - aa)
            nodes.append(c + hw * x)
            weights.append(hw * w)
    return np.concatenate(nodes), np.concatenate(weights)


def dispersal_increment(kernel, profile, z, tail_mass=1e-16):
    """N[profile](z) = int J(y) profile(z-y) dy - profile(z) by panel
    Gauss-Legendre quadrature.

    The main vectorized pass splits panels only at kernel density
    breakpoints; grid points whose translate window contains a profile
    kink are recomputed individually with extra panel splits at the kink
    so the quadrature never straddles a derivative jump.
    """
    R = kernel.truncation_radius(tail_mass=tail_mass)
    brk = sorted({-R, R, *(b for b in kernel.density_breakpoints() if -R < b < R)})
    y, wq = _gl_panels(brk)
    Jw = kernel.density(y) * wq

    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    vals = np.empty(z.shape)
    chunk = max(1, int(4_000_000 // max(1, y.size)))
    for i0 in range(0, z.size, chunk):
        blk = z[i0:i0 + chunk]
        vals[i0:i0 + chunk] = profile.fn(blk[:, None] - y[None, :]) @ Jw

    kinks = profile.kinks
    if kinks:
        special = np.zeros(z.shape, dtype=bool)
        for kz in kinks:
            special |= np.abs(z - kz) <= R + 1e-12
        for j in np.nonzero(special)[0]:
            zz = z[j]
            extra = [zz - kz for kz in kinks if -R < zz - kz < R]
            edges = sorted(set(brk) | set(extra))
            y2, w2 = _gl_panels(edges)
            vals[j] = np.dot(kernel.density(y2) * w2, profile.fn(zz - y2))

    out = vals - profile.fn(z)
    return float(out[0]) if scalar else out


def verify_bounds(pair, params, env, kernels, grid, tol=1e-8, exclude_steps=2):
    """Evaluate the six pair inequalities on the grid and report worst values.

    Grid points within exclude_steps grid spacings of any kink are
    excluded (the inequalities are only required off the kink set).
    """
    z = np.asarray(grid, dtype=float)
    hstep = float(np.median(np.diff(z))) if z.size > 1 else 1.0
    J1, J2, J3 = kernels
    ub1, ub2, ub3 = pair.uppers
    lb1, lb2, lb3 = pair.lowers
    r1, r2, r3 = params.r1, params.r2, params.r3
    d1, d2, d3 = params.d1, params.d2, params.d3
    a, b, h, k, s = params.a, params.b, params.h, params.k, params.s

    keep = np.ones(z.shape, dtype=bool)
    for kz in pair.kinks:
        keep &= np.abs(z - kz) > exclude_steps * hstep
    zk = z[keep]

    alpha = env.evaluate(zk)
    U1, U2, U3, L1, L2, L3 = (pr.fn(zk) for pr in (ub1, ub2, ub3, lb1, lb2, lb3))

    exprs = {
        "upper_1": d1 * dispersal_increment(J1, ub1, zk) + s * ub1.dfn(zk)
        + r1 * U1 * (-1.0 - U1 - k * L2 + a * U3),
        "upper_2": d2 * dispersal_increment(J2, ub2, zk) + s * ub2.dfn(zk)
        + r2 * U2 * (-1.0 - h * L1 - U2 + a * U3),
        "upper_3": d3 * dispersal_increment(J3, ub3, zk) + s * ub3.dfn(zk)
        + r3 * U3 * (alpha - b * L1 - b * L2 - U3),
        "lower_1": d1 * dispersal_increment(J1, lb1, zk) + s * lb1.dfn(zk)
        + r1 * L1 * (-1.0 - L1 - k * U2 + a * L3),
        "lower_2": d2 * dispersal_increment(J2, lb2, zk) + s * lb2.dfn(zk)
        + r2 * L2 * (-1.0 - h * U1 - L2 + a * L3),
        "lower_3": d3 * dispersal_increment(J3, lb3, zk) + s * lb3.dfn(zk)
        + r3 * L3 * (alpha - b * U1 - b * U2 - L3),
    }

    report = {"tol": tol, "n_grid": int(z.size),
              "n_excluded": int(z.size - zk.size), "inequalities": {}}
    ok = True
    for name, vals in exprs.items():
        if name.startswith("upper"):
            i = int(np.argmax(vals))
            worst = float(vals[i])
            passed = worst <= tol
        else:
            i = int(np.argmin(vals))
            worst = float(vals[i])
            passed = worst >= -tol
        ok &= passed
        report["inequalities"][name] = {
            "worst": worst, "z": float(zk[i]), "pass": bool(passed)}

    gaps = np.concatenate([ub.fn(z) - lb.fn(z)
                           for ub, lb in zip(pair.uppers, pair.lowers)])
    lows = np.concatenate([lb.fn(z) for lb in pair.lowers])
    order_ok = bool(np.min(gaps) >= 0.0 and np.min(lows) >= 0.0)
    report["ordering"] = {"pass": order_ok, "min_gap": float(np.min(gaps)),
                          "min_lower": float(np.min(lows))}
    ok &= order_ok

    right = pair.params.get("right_state")
    if right is not None:
        zr = float(z[-1])
        tails = {}
        for name, pr, target in zip(
                ("upper_1", "upper_2", "upper_3"), pair.uppers, right):
            tails[name] = {"value": float(pr.fn(zr)), "target": float(target)}
        report["right_tails"] = tails

    report["pass"] = bool(ok)
    return report
