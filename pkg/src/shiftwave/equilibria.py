"""Model parameters, constant states, and regime gating.

The system couples two weakly competing predators (densities u, v) and one
prey (w).  The non-trivial spatially constant states with a saturated
environment are

    E1 = (0, 0, 1)          predator-free
    E2 = (u_p, 0, w_p)      single predator u established
    E3 = (0, u_p, w_p)      single predator v established
    E4 = (u*, v*, w*)       co-existence
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import spectral


@dataclass(frozen=True)
class ModelParams:
    d1: float
    d2: float
    d3: float
    r1: float
    r2: float
    r3: float
    a: float
    b: float
    h: float
    k: float
    s: float

    def validate(self):
        """Raise naming the first violated base inequality."""
        checks = [
            (self.a > 1, "a > 1"),
            (0 < self.h < 1, "0 < h < 1"),
            (0 < self.k < 1, "0 < k < 1"),
            (0 < self.b < 1.0 / (2.0 * (self.a - 1.0)), "0 < b < 1/(2(a-1))"),
            (self.s > 0, "s > 0"),
        ]
        for name in ("d1", "d2", "d3", "r1", "r2", "r3"):
            checks.append((getattr(self, name) > 0, f"{name} > 0"))
        for ok, desc in checks:
            if not ok:
                raise ValueError(f"parameter constraint violated: {desc}")

    def reaction_rates(self):
        return self.r1, self.r2, self.r3

    def diffusions(self):
        return self.d1, self.d2, self.d3


@dataclass(frozen=True)
class SteadyStates:
    E1: tuple
    E2: tuple
    E3: tuple
    E4: tuple
    u_p: float
    w_p: float
    gamma: float
    beta2: float


def compute_states(params):
    """Closed-form constant states; embeds the algebraic identity checks."""
    params.validate()
    a, b, h, k = params.a, params.b, params.h, params.k
    u_p = (a - 1.0) / (a * b + 1.0)
    w_p = (b + 1.0) / (a * b + 1.0)
    gamma = (2.0 - h - k) / (1.0 - h * k)
    w_star = (1.0 + b * gamma) / (1.0 + a * b * gamma)
    v_star = (1.0 - h) / (1.0 - h * k) * (a * w_star - 1.0)
    u_star = (1.0 - k) / (1.0 - h * k) * (a * w_star - 1.0)
    beta2 = (a - 1.0) * (1.0 - h) / (a * b + 1.0)

    if min(u_p, w_p, u_star, v_star, w_star, beta2) <= 0:
        raise ValueError("computed state components must all be positive")
    if abs(w_p + b * u_p - 1.0) > 1e-12:
        raise ValueError("identity w_p + b u_p = 1 violated")
    if gamma <= 1.0:
        raise ValueError("gamma = (2-h-k)/(1-hk) must exceed 1")

    return SteadyStates(
        E1=(0.0, 0.0, 1.0),
        E2=(u_p, 0.0, w_p),
        E3=(0.0, u_p, w_p),
        E4=(u_star, v_star, w_star),
        u_p=u_p, w_p=w_p, gamma=gamma, beta2=beta2,
    )


def coexistence_residual(params, states):
    """Residual of the co-existence fixed-point equations with a saturated
    environment (all three should vanish at E4)."""
    a, b, h, k = params.a, params.b, params.h, params.k
    u, v, w = states.E4
    return (
        -1.0 - u - k * v + a * w,
        -1.0 - h * u - v + a * w,
        1.0 - b * u - b * v - w,
    )


def swap_predator_roles(params):
    """Exchange the two predators: (d1, r1, k) <-> (d2, r2, h).

    The single-predator state with v established is produced by running the
    u-established machinery on the swapped parameters.
    """
    return replace(params, d1=params.d2, d2=params.d1, r1=params.r2,
                   r2=params.r1, h=params.k, k=params.h)


def check_regimes(params, env, kernels):
    """Advisory report on which existence regimes the inputs satisfy.

    kernels is the triple (J1, J2, J3).  Never raises on a failed
    condition; every gate is reported with its numbers.
    """
    params.validate()
    a, b, h, k = params.a, params.b, params.h, params.k
    states = compute_states(params)
    J1, J2, J3 = kernels

    sp1 = spectral.critical_speed(J1, params.d1, params.r1 * (a - 1.0))
    sp2 = spectral.critical_speed(J2, params.d2, params.r2 * (a - 1.0))
    sp2_mixed = spectral.critical_speed(J2, params.d2, params.r2 * states.beta2)

    report = {
        "speeds": {
            "s": params.s,
            "s_star_1": sp1.s_crit, "lambda_star_1": sp1.lam_crit,
            "s_star_2": sp2.s_crit, "lambda_star_2": sp2.lam_crit,
            "s_star_star_2": sp2_mixed.s_crit, "lambda_star_star_2": sp2_mixed.lam_crit,
        },
        "conditions": {},
        "regimes": {},
    }
    cond = report["conditions"]

    b_cap = min((1.0 - h) / (2.0 * a), (1.0 - k) / (2.0 * a))
    cond["small_predation"] = {"pass": b < b_cap, "b": b, "bound": b_cap}

    cond["dominant_second_dispersal"] = {
        "pass": max(params.d1, params.d3) <= params.d2,
        "d": (params.d1, params.d2, params.d3),
    }
    same_kernels = (J1 == J2 == J3)
    cond["identical_kernels"] = {"pass": same_kernels}
    lhs = params.r1 * (1.0 + k * (a - 1.0))
    rhs = params.r2 * states.beta2
    cond["growth_dominance"] = {"pass": lhs <= rhs, "lhs": lhs, "rhs": rhs}

    rho = env.rho
    lam_hat_2 = J2.mgf_domain[1]
    if rho < lam_hat_2:
        R2_rho = float(spectral.speed_functional(J2, params.d2,
                                                 params.r2 * states.beta2, rho))
    else:
        R2_rho = float("inf")
    cond["speed_vs_decay"] = {"pass": params.s >= R2_rho, "R2_rho": R2_rho, "rho": rho}
    cond["rho_above_mixed_argmin"] = {"pass": rho >= sp2_mixed.lam_crit,
                                      "rho": rho, "lambda_star_star_2": sp2_mixed.lam_crit}

    compact12 = J1.support is not None and J2.support is not None
    compact_all = compact12 and J3.support is not None
    cond["compact_supports_12"] = {"pass": compact12}
    cond["compact_supports_all"] = {"pass": compact_all}
    equal_d = params.d1 == params.d2 == params.d3

    s_max = max(sp1.s_crit, sp2.s_crit)
    reg = report["regimes"]
    reg["e4"] = {"pass": cond["small_predation"]["pass"], "requires": ["small_predation"]}
    reg["e1"] = {"pass": params.s > s_max, "s_needed": s_max}
    if params.s == s_max and not compact12:
        reg["e1"]["note"] = "s equal to the critical speed with non-compact support: unknown"
    reg["e2"] = {
        "pass": (cond["dominant_second_dispersal"]["pass"]
                 and cond["identical_kernels"]["pass"]
                 and cond["growth_dominance"]["pass"]
                 and params.s > sp2_mixed.s_crit
                 and cond["speed_vs_decay"]["pass"]),
    }
    def _at(s_target):
        return abs(params.s - s_target) <= 1e-9 * (1.0 + s_target)

    near = abs(sp1.s_crit - sp2.s_crit) <= 1e-9 * (1.0 + s_max)
    reg["critical_equal_speeds"] = {
        "pass": compact12 and near and _at(s_max),
        "s_critical": s_max,
    }
    reg["critical_s1_dominant"] = {
        "pass": (J1.support is not None
                 and sp1.s_crit > sp2.s_crit + 1e-9 * (1.0 + s_max)
                 and _at(sp1.s_crit)),
        "s_critical": sp1.s_crit,
    }
    reg["critical_e2"] = {
        "pass": (compact_all and equal_d and same_kernels
                 and cond["growth_dominance"]["pass"]
                 and cond["rho_above_mixed_argmin"]["pass"]
                 and _at(sp2_mixed.s_crit)),
        "s_critical": sp2_mixed.s_crit,
    }

    alpha_plus = env.alpha_plus
    report["alpha_plus_normalized"] = bool(abs(alpha_plus - 1.0) <= 1e-12)
    return report
