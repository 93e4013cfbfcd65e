"""Shifting-environment profiles.

The habitat quality alpha(z) is continuous, has limits at both infinities
with alpha(-inf) < 0 < alpha(+inf), stays below its right limit, and
approaches it at an exponential rate rho with prefactor C:

    alpha(+inf) - alpha(z) <= C e^{-rho z}.

A stored shift A means the profile is evaluated as alpha(z + A); pushing A
up makes the approach bound alpha(z) >= alpha(+inf) - eps e^{-rho z} hold
globally with eps = C e^{-rho A}.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class Environment:
    family: str
    params: dict = field(compare=False)
    alpha_minus: float
    alpha_plus: float
    rho: float
    C: float
    shift: float = 0.0

    def raw(self, z):
        """alpha(z) before the stored shift."""
        z = np.asarray(z, dtype=float)
        p = self.params
        if self.family == "tanh_ramp":
            lo, hi = self.alpha_minus, self.alpha_plus
            return lo + (hi - lo) * 0.5 * (1.0 + np.tanh(p["steepness"] * (z - p["center"])))
        if self.family == "step":
            return np.where(z < p["center"], self.alpha_minus, self.alpha_plus)
        if self.family == "piecewise_linear":
            return np.interp(z, p["knots_z"], p["knots_alpha"],
                             left=self.alpha_minus, right=self.alpha_plus)
        if self.family == "tabulated":
            return np.interp(z, p["z"], p["alpha"],
                             left=p["alpha"][0], right=p["alpha"][-1])
        if self.family == "constant":
            return np.full_like(z, p["level"])
        raise ValueError(f"unknown environment family {self.family!r}")

    def evaluate(self, z):
        return self.raw(np.asarray(z, dtype=float) + self.shift)


def evaluate_env(env, z):
    return env.evaluate(z)


def tanh_env(center=0.0, steepness=1.0, alpha_minus=-0.5, alpha_plus=1.0,
             rho=None, C=None):
    """Smooth ramp; 1 - tanh(kappa z) ~ 2 e^{-2 kappa z}, so any declared
    rho <= 2*steepness is admissible."""
    _check_levels(alpha_minus, alpha_plus)
    if rho is None:
        rho = steepness  # safely below the 2*steepness decay rate
    if C is None:
        C = (alpha_plus - alpha_minus) * np.exp(rho * center)
    return Environment("tanh_ramp", {"center": float(center), "steepness": float(steepness)},
                       float(alpha_minus), float(alpha_plus), float(rho), float(C))


def step_env(center=0.0, alpha_minus=-0.5, alpha_plus=1.0, rho=1.0, C=None):
    _check_levels(alpha_minus, alpha_plus)
    if C is None:
        C = (alpha_plus - alpha_minus) * np.exp(rho * center)
    return Environment("step", {"center": float(center)},
                       float(alpha_minus), float(alpha_plus), float(rho), float(C))


def piecewise_linear_env(knots_z, knots_alpha, rho, C=None):
    kz = np.asarray(knots_z, dtype=float)
    ka = np.asarray(knots_alpha, dtype=float)
    if kz.ndim != 1 or kz.shape != ka.shape or kz.size < 2:
        raise ValueError("knots must be 1-d arrays of equal length >= 2")
    if np.any(np.diff(kz) <= 0):
        raise ValueError("knot positions must be strictly increasing")
    _check_levels(ka[0], ka[-1])
    if C is None:
        C = float(np.max((ka[-1] - ka) * np.exp(rho * kz)))
        C = max(C, 1e-300)
    return Environment("piecewise_linear", {"knots_z": kz, "knots_alpha": ka},
                       float(ka[0]), float(ka[-1]), float(rho), float(C))


def tabulated_env(z, alpha, rho, C=None):
    """Linear interpolation, held at the end values outside the table."""
    z = np.asarray(z, dtype=float)
    a = np.asarray(alpha, dtype=float)
    if z.ndim != 1 or z.shape != a.shape or z.size < 2:
        raise ValueError("z and alpha must be 1-d arrays of equal length >= 2")
    if np.any(np.diff(z) <= 0):
        raise ValueError("z must be strictly increasing")
    env = Environment("tabulated", {"z": z, "alpha": a},
                      float(a[0]), float(a[-1]), float(rho), 1.0)
    C_fit = fitted_decay_constant(env) if C is None else float(C)
    return replace(env, C=C_fit)


def tabulated_env_from_csv(path, rho):
    zs, als = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                zs.append(float(row[0]))
                als.append(float(row[1]))
            except ValueError:
                continue
    return tabulated_env(zs, als, rho)


def constant_env(level=1.0):
    """Homogeneous test environment; violates the sign conditions on the
    limits and is only meant for equilibrium and self-consistency tests."""
    return Environment("constant", {"level": float(level)},
                       float(level), float(level), 1.0, 0.0)


def env_from_config(cfg):
    cfg = dict(cfg)
    family = cfg.pop("family", None)
    if family == "tanh_ramp":
        allowed = {"center", "steepness", "alpha_minus", "alpha_plus", "rho", "C"}
        _check_keys(cfg, allowed, family)
        return tanh_env(**cfg)
    if family == "step":
        allowed = {"center", "alpha_minus", "alpha_plus", "rho", "C"}
        _check_keys(cfg, allowed, family)
        return step_env(**cfg)
    if family == "piecewise_linear":
        allowed = {"knots_z", "knots_alpha", "rho", "C"}
        _check_keys(cfg, allowed, family)
        return piecewise_linear_env(**cfg)
    if family == "tabulated":
        allowed = {"path", "rho"}
        _check_keys(cfg, allowed, family)
        return tabulated_env_from_csv(**cfg)
    if family == "constant":
        _check_keys(cfg, {"level"}, family)
        return constant_env(**cfg)
    raise ValueError(f"unknown environment family {family!r}")


def _check_keys(cfg, allowed, family):
    extra = set(cfg) - allowed
    if extra:
        raise ValueError(f"unknown keys for environment family {family!r}: {sorted(extra)}")


def _check_levels(alpha_minus, alpha_plus):
    if not (alpha_minus < 0.0 < alpha_plus):
        raise ValueError("environment limits must satisfy alpha(-inf) < 0 < alpha(+inf)")


def _check_grid(env, n=4000):
    """Geometric z-grid covering many decay lengths of the declared rho."""
    zmax = 200.0 / env.rho
    pos = np.geomspace(1e-3, zmax, n // 2)
    return np.concatenate([-pos[::-1][: n // 4], [0.0], pos])


def fitted_decay_constant(env, grid=None):
    """Minimal C such that alpha_plus - alpha(z) <= C e^{-rho z} on the grid
    (global over the grid, including z < 0, so the bound holds everywhere
    the grid samples)."""
    z = _check_grid(env) if grid is None else np.asarray(grid, dtype=float)
    gap = env.alpha_plus - env.raw(z)
    vals = gap * np.exp(env.rho * z)
    return float(max(np.max(vals), 1e-300))


def check_env_conditions(env):
    """Pass/fail report for the limit and decay conditions."""
    z = _check_grid(env)
    alpha = env.raw(z)
    report = {"checks": {}}
    checks = report["checks"]

    sign_ok = env.alpha_minus < 0.0 < env.alpha_plus
    below_ok = bool(np.all(alpha <= env.alpha_plus + 1e-12))
    checks["limits_and_upper_bound"] = {
        "pass": bool(sign_ok and below_ok),
        "alpha_minus": env.alpha_minus, "alpha_plus": env.alpha_plus,
    }

    vals = (env.alpha_plus - alpha) * np.exp(env.rho * z)
    i_max = int(np.argmax(vals))
    C_fit = float(max(vals[i_max], 1e-300))
    # if the maximizer sits at the right edge the declared rho overstates
    # the actual decay rate
    rho_ok = i_max < z.size - 1
    checks["exponential_approach"] = {
        "pass": bool(rho_ok), "rho": env.rho, "C_fit": C_fit,
        "C_declared": env.C,
    }

    checks["monotone"] = {"pass": True, "monotone": bool(np.all(np.diff(alpha) >= -1e-12))}

    report["pass"] = all(c["pass"] for c in checks.values())
    return report


def normalize_shift(env, eps):
    """Shift so that alpha(z) >= alpha_plus - eps e^{-rho z} for all z.

    The required translation is A = ln(C / eps) / rho with C the fitted
    global decay constant.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    report = check_env_conditions(env)
    if not report["checks"]["exponential_approach"]["pass"]:
        raise ValueError("exponential approach condition not verified for declared rho")
    C = report["checks"]["exponential_approach"]["C_fit"]
    A = max(np.log(C / eps) / env.rho, 0.0)
    return replace(env, C=C, shift=float(A))


def required_translation(env, eps):
    """Translation A achieving the eps-envelope without mutating the env."""
    C = fitted_decay_constant(env)
    return max(float(np.log(C / eps) / env.rho), 0.0)


def normalized_to_unit_plus(env):
    """Rescale alpha by 1/alpha_plus so that alpha(+inf) = 1.

    Returns (env_scaled, scale); state formulas assume this normalization.
    """
    s = env.alpha_plus
    if abs(s - 1.0) < 1e-14:
        return env, 1.0
    if env.family == "tanh_ramp":
        new = replace(env, alpha_minus=env.alpha_minus / s, alpha_plus=1.0,
                      C=env.C / s)
        return new, s
    if env.family == "step":
        new = replace(env, alpha_minus=env.alpha_minus / s, alpha_plus=1.0,
                      C=env.C / s)
        return new, s
    if env.family == "piecewise_linear":
        p = dict(env.params)
        p["knots_alpha"] = p["knots_alpha"] / s
        new = replace(env, params=p, alpha_minus=env.alpha_minus / s,
                      alpha_plus=1.0, C=env.C / s)
        return new, s
    if env.family == "tabulated":
        p = dict(env.params)
        p["alpha"] = p["alpha"] / s
        new = replace(env, params=p, alpha_minus=env.alpha_minus / s,
                      alpha_plus=1.0, C=env.C / s)
        return new, s
    raise ValueError(f"cannot rescale environment family {env.family!r}")
