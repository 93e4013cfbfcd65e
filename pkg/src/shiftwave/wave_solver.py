"""Fixed-point solver for the traveling-wave system and its scalar analogue.

The wave system

    -s phi_i' = d_i N_i[phi_i] + reaction_i(phi, z),     i = 1, 2, 3,

is recast as phi = P[phi] with

    F_i[Phi](y) = beta phi_i(y) + d_i N_i[phi_i](y) + reaction_i(y),
    P_i[Phi](z) = (1/s) int_0^inf e^{-beta u / s} F_i[Phi](z + u) du,

and solved by Picard iteration started from the lower profile of a
verified bound pair, clipping every sweep back into the order interval.
The half-line integral is evaluated cell by cell with a cubic
interpolant against exact exponential moments, accumulated by the exact
backward recurrence I_j = G_j + e^{-c h} I_{j+1}; constants are exact
fixed points of the discrete operator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import lfilter

from . import kernels as _kern


@dataclass(frozen=True)
class SolverContext:
    beta: float
    M: float
    sigmas: tuple
    tol: float = 1e-10
    max_iter: int = 5000


@dataclass
class WaveProfile:
    z: np.ndarray
    phi: np.ndarray          # shape (3, N)
    residual: np.ndarray     # shape (3, N)
    metadata: dict = field(default_factory=dict)

    @property
    def phi1(self):
        return self.phi[0]

    @property
    def phi2(self):
        return self.phi[1]

    @property
    def phi3(self):
        return self.phi[2]

    def table(self):
        """Columns z, phi1, phi2, phi3, res1, res2, res3."""
        return np.column_stack([self.z, *self.phi, *self.residual])


def make_context(params, env, pair, grid, tol=1e-10, max_iter=5000):
    """Damping constant beta = max sigma_i for the sup bound M of the pair."""
    z = np.asarray(grid, dtype=float)
    sup_alpha = float(np.max(np.abs(env.evaluate(z))))
    sup_upper = max(float(np.max(p.fn(z))) for p in pair.uppers)
    M = max(sup_alpha, sup_upper)
    s1 = params.d1 + params.r1 * (2.0 * M + params.k * M + 1.0)
    s2 = params.d2 + params.r2 * (2.0 * M + params.h * M + 1.0)
    s3 = params.d3 + params.r3 * M * (params.b + 3.0)
    beta = max(s1, s2, s3)
    return SolverContext(beta=beta, M=M, sigmas=(s1, s2, s3),
                         tol=tol, max_iter=max_iter)


# ---------------------------------------------------------------------------
# Discrete building blocks
# ---------------------------------------------------------------------------

def _exp_moments(c, h):
    """mu_r = int_0^h u^r e^{-c u} du for r = 0..3, stable for small c h."""
    x = c * h
    if x < 1e-2:
        # series: mu_r = h^{r+1} sum_n (-x)^n / (n! (r+n+1))
        mus = []
        for r in range(4):
            term, total = 1.0 / (r + 1.0), 1.0 / (r + 1.0)
            fac, power = 1.0, 1.0
            for n in range(1, 30):
                fac *= n
                power *= -x
                inc = power / (fac * (r + n + 1.0))
                total += inc
                if abs(inc) < 1e-18 * abs(total):
                    break
            mus.append(h ** (r + 1) * total)
        return np.array(mus)
    e = np.exp(-x)
    mu = np.empty(4)
    mu[0] = (1.0 - e) / c
    for r in range(1, 4):
        mu[r] = (r * mu[r - 1] - h ** r * e) / c
    return mu


def _cell_weights(c, h):
    """Weights on (F_{j-1}, F_j, F_{j+1}, F_{j+2}) reproducing
    int_0^h e^{-cu} p(u) du exactly for cubics p through those nodes."""
    t = np.array([-h, 0.0, h, 2.0 * h])
    V = np.vander(t, 4, increasing=True)          # V[i, r] = t_i^r
    mu = _exp_moments(c, h)
    return np.linalg.solve(V.T, mu)


def _edge_convolve(values, weights, M):
    """Discrete convolution sum_m w_m f_{j-m}, extending f by edge values."""
    padded = np.concatenate([
        np.full(M, values[0]), values, np.full(M, values[-1])])
    return np.convolve(padded, weights, mode="valid")


class _HalfLineIntegral:
    """I_j = int_0^inf e^{-cu} F(z_j + u) du on a uniform grid, with F held
    at its right-edge value beyond the grid."""

    def __init__(self, c, h):
        self.c = c
        self.q = float(np.exp(-c * h))
        self.w = _cell_weights(c, h)

    def __call__(self, F):
        F = np.asarray(F, dtype=float)
        pad = np.concatenate([F[:1], F, F[-1:], F[-1:]])
        # cell integrals G_j over [z_j, z_j + h], cubic through 4 neighbors
        G = (self.w[0] * pad[:-3] + self.w[1] * pad[1:-2]
             + self.w[2] * pad[2:-1] + self.w[3] * pad[3:])
        tail = F[-1] / self.c
        rev, _ = lfilter([1.0], [1.0, -self.q], G[::-1],
                         zi=np.array([self.q * tail]))
        return rev[::-1]


def _derivative4(values, h):
    """Fourth-order centered first derivative with edge-value extension."""
    pad = np.concatenate([values[:1], values[:1], values,
                          values[-1:], values[-1:]])
    return (-pad[4:] + 8.0 * pad[3:-1] - 8.0 * pad[1:-3] + pad[:-4]) / (12.0 * h)


def _reactions(params, alpha, phi):
    r1, r2, r3 = params.r1, params.r2, params.r3
    a, b, h, k = params.a, params.b, params.h, params.k
    p1, p2, p3 = phi
    return np.array([
        r1 * p1 * (-1.0 - p1 - k * p2 + a * p3),
        r2 * p2 * (-1.0 - h * p1 - p2 + a * p3),
        r3 * p3 * (alpha - b * p1 - b * p2 - p3),
    ])


# ---------------------------------------------------------------------------
# System solver
# ---------------------------------------------------------------------------

class _Discretization:
    def __init__(self, params, env, kernels, grid, beta):
        self.z = np.asarray(grid, dtype=float)
        self.h = float(self.z[1] - self.z[0])
        self.alpha = env.evaluate(self.z)
        self.params = params
        self.beta = float(beta)
        self.s = float(params.s)
        self.ds = (params.d1, params.d2, params.d3)
        self.conv = []
        for J in kernels:
            M, w = _kern.aligned_weights_highorder(J, self.h)
            self.conv.append((M, w))
        self.integral = _HalfLineIntegral(self.beta / self.s, self.h)

    def dispersal(self, i, values):
        M, w = self.conv[i]
        return _edge_convolve(values, w, M) - values

    def apply_P(self, phi):
        out = np.empty_like(phi)
        rea = _reactions(self.params, self.alpha, phi)
        for i in range(3):
            F = (self.beta * phi[i] + self.ds[i] * self.dispersal(i, phi[i])
                 + rea[i])
            out[i] = self.integral(F) / self.s
        return out

    def residual(self, phi):
        rea = _reactions(self.params, self.alpha, phi)
        res = np.empty_like(phi)
        for i in range(3):
            res[i] = (self.ds[i] * self.dispersal(i, phi[i])
                      + self.s * _derivative4(phi[i], self.h) + rea[i])
        return res


def apply_P(profile, ctx, params, env, kernels):
    """One application of the integral operator to a WaveProfile."""
    disc = _Discretization(params, env, kernels, profile.z, ctx.beta)
    phi = disc.apply_P(profile.phi)
    return WaveProfile(z=profile.z.copy(), phi=phi,
                       residual=disc.residual(phi),
                       metadata={"beta": ctx.beta, "applications": 1})


def solve_wave(pair, ctx, params, env, kernels, grid, tol=None, max_iter=None,
               max_restarts=2):
    """Picard iteration inside the order interval of a verified bound pair.

    Starts from the lower profile, clips each sweep into the interval,
    halves the step and restarts from the interpolant on stall, and
    reports the residual of the wave system by direct substitution."""
    tol = ctx.tol if tol is None else tol
    max_iter = ctx.max_iter if max_iter is None else max_iter
    z = np.asarray(grid, dtype=float)

    iterations = 0
    restarts = 0
    phi_start = None
    while True:
        disc = _Discretization(params, env, kernels, z, ctx.beta)
        lb = np.array([p.fn(z) for p in pair.lowers])
        ub = np.array([p.fn(z) for p in pair.uppers])
        start = lb if phi_start is None else np.clip(phi_start, lb, ub)
        phi, its, delta, clips, stalled = _picard_from(
            disc, start, lb, ub, tol, max_iter, clip_tol=10.0 * tol)
        iterations += its
        if not stalled or restarts >= max_restarts:
            break
        # stall: halve the step and restart from the interpolant
        restarts += 1
        z_new = np.linspace(z[0], z[-1], 2 * (z.size - 1) + 1)
        phi_start = np.array([np.interp(z_new, z, comp) for comp in phi])
        z = z_new

    residual = disc.residual(phi)
    interior = slice(5, -5)
    meta = {
        "iterations": iterations,
        "beta": ctx.beta,
        "final_sup_change": delta,
        "converged": bool(delta <= tol),
        "nontrivial_clips": clips,
        "restarts": restarts,
        "h": float(z[1] - z[0]),
        "residual_sup_interior": float(np.max(np.abs(residual[:, interior]))),
        "regime": pair.regime,
    }
    return WaveProfile(z=z, phi=phi, residual=residual, metadata=meta)


def _picard_from(disc, start, lb, ub, tol, max_iter, clip_tol):
    phi = start.copy()
    delta = np.inf
    clips = 0
    history = []
    for it in range(1, max_iter + 1):
        new = disc.apply_P(phi)
        over = new - ub
        under = lb - new
        clips = int(np.count_nonzero(over > clip_tol)
                    + np.count_nonzero(under > clip_tol))
        np.clip(new, lb, ub, out=new)
        delta = float(np.max(np.abs(new - phi)))
        phi = new
        history.append(delta)
        if delta <= tol:
            return phi, it, delta, clips, False
        # plateau: sup-change flat (within 2%) over the last 100 sweeps
        if it >= 100:
            window = history[-100:]
            if max(window) <= 1.02 * min(window):
                return phi, it, delta, clips, True
    return phi, max_iter, delta, clips, False


# ---------------------------------------------------------------------------
# Scalar forced wave (single species with an effective heterogeneity)
# ---------------------------------------------------------------------------

@dataclass
class ScalarWave:
    z: np.ndarray
    values: np.ndarray
    fn: object
    dfn: object
    envelope: tuple           # (B, lam0): values >= limit - B e^{-lam0 z}
    limit: float
    metadata: dict = field(default_factory=dict)


class _ScalarDiscretization:
    def __init__(self, kernel, d, r, s, alpha, grid, beta):
        self.z = np.asarray(grid, dtype=float)
        self.h = float(self.z[1] - self.z[0])
        self.alpha = alpha
        self.d, self.r, self.s = float(d), float(r), float(s)
        self.beta = float(beta)
        M, w = _kern.aligned_weights_highorder(kernel, self.h)
        self.conv = (M, w)
        self.integral = _HalfLineIntegral(self.beta / self.s, self.h)

    def dispersal(self, values):
        M, w = self.conv
        return _edge_convolve(values, w, M) - values

    def apply_P(self, phi):
        p = phi[0]
        F = (self.beta * p + self.d * self.dispersal(p)
             + self.r * p * (self.alpha - p))
        return (self.integral(F) / self.s)[None, :]

    def residual(self, phi):
        p = phi[0]
        res = (self.d * self.dispersal(p)
               + self.s * _derivative4(p, self.h)
               + self.r * p * (self.alpha - p))
        return res[None, :]


def _clamped_spline(z, values):
    """Cubic spline with constant extension by the edge values."""
    cs = CubicSpline(z, values)
    dcs = cs.derivative()
    z0, z1 = float(z[0]), float(z[-1])

    def fn(x):
        x = np.asarray(x, dtype=float)
        return cs(np.clip(x, z0, z1))

    def dfn(x):
        x = np.asarray(x, dtype=float)
        inside = (x >= z0) & (x <= z1)
        return np.where(inside, dcs(np.clip(x, z0, z1)), 0.0)

    return fn, dfn


def solve_scalar(kernel, d, r, s, alpha_fn, alpha_plus, rho, grid,
                 tol=1e-10, max_iter=5000):
    """Forced wave of -s phi' = d N[phi] + r phi (alpha(z) - phi).

    alpha_fn must be negative far left and approach alpha_plus > 0 at an
    exponential rate rho.  The pair is the constant upper alpha_plus and
    the shifted envelope lower max(alpha_plus - e^{-lam0 (z - A)}, 0);
    the recorded envelope constants (B, lam0) with B = e^{lam0 A} certify
    phi(z) >= alpha_plus - B e^{-lam0 z} at every node.
    """
    from . import spectral  # local import to avoid a cycle at module load

    z = np.asarray(grid, dtype=float)
    alpha = np.asarray(alpha_fn(z), dtype=float)
    gamma = float(alpha_plus)
    if gamma <= 0:
        raise ValueError("alpha_plus must be positive")
    if alpha[0] >= 0:
        raise ValueError("effective heterogeneity must be negative far left")

    g = spectral.CharFunction(kernel, d, s, 0.0)
    lam0 = spectral.lambda0_pick(g, [rho, kernel.mgf_domain[1]])
    eps = 0.5 * (-float(g(lam0))) / (r * gamma ** (rho / lam0))

    with np.errstate(over="ignore"):
        fit = (gamma - alpha) * np.exp(rho * z)
    C = float(max(np.max(fit[np.isfinite(fit)]), 1e-300))
    A = max(float(np.log(C / eps) / rho), 0.0)

    lb = np.maximum(gamma - np.exp(-lam0 * np.minimum(z - A, 700.0 / lam0)), 0.0)
    ub = np.full_like(z, gamma)

    M = max(float(np.max(np.abs(alpha))), gamma)
    beta = d + r * (2.0 * M + float(np.max(np.abs(alpha))))
    disc = _ScalarDiscretization(kernel, d, r, s, alpha, z, beta)
    phi, its, delta, clips, stalled = _picard_from(
        disc, lb[None, :], lb[None, :], ub[None, :], tol, max_iter,
        clip_tol=10.0 * tol)
    values = phi[0]
    res = disc.residual(phi)[0]
    fn, dfn = _clamped_spline(z, values)
    meta = {
        "iterations": its, "beta": beta, "final_sup_change": delta,
        "converged": bool(delta <= tol), "nontrivial_clips": clips,
        "stalled": bool(stalled), "lam0": lam0, "eps": eps, "A": A,
        "residual_sup_interior": float(np.max(np.abs(res[5:-5]))),
    }
    return ScalarWave(z=z, values=values, fn=fn, dfn=dfn,
                      envelope=(float(np.exp(lam0 * A)), lam0),
                      limit=gamma, metadata=meta)


def make_scalar_solver(grid, tol=1e-10, max_iter=5000):
    """Adapter with the signature expected by the co-existence pair builder."""
    def solver(kernel, d, r, s, alpha_fn, alpha_plus, rho):
        return solve_scalar(kernel, d, r, s, alpha_fn, alpha_plus, rho,
                            grid, tol=tol, max_iter=max_iter)
    return solver


# ---------------------------------------------------------------------------
# Tail diagnostics
# ---------------------------------------------------------------------------

def tail_decay_rate(z, values, window):
    """Least-squares decay rate of values ~ e^{-lam z} over the window.

    Returns lam > 0 for decaying data; raises on non-positive values."""
    z = np.asarray(z, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = window
    mask = (z >= lo) & (z <= hi)
    if np.count_nonzero(mask) < 2:
        raise ValueError("window contains fewer than two grid points")
    if np.any(values[mask] <= 0):
        raise ValueError("tail window contains non-positive values")
    slope = np.polyfit(z[mask], np.log(values[mask]), 1)[0]
    return float(-slope)


def characteristic_residual(lam_fit, kernel, d, rc, s):
    """|s lam - d [I(lam) - 1] - rc| for the fitted tail rate."""
    return abs(s * lam_fit - d * (_kern.mgf(kernel, lam_fit) - 1.0) - rc)
