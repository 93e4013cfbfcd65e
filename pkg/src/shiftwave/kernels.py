"""Dispersal kernels: densities, moment-generating functions, discretization.

A kernel is a probability density J on the line with zero mean whose
moment-generating function I(lam) = int J(y) e^{lam y} dy is finite on an
open interval around 0.  Supported families: uniform, two-bump, laplace
(two-sided exponential), gaussian, and tabulated (from a CSV table).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

INF = float("inf")

# Gauss-Legendre panel rule used for all density quadratures.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _panel_quad(f, breakpoints):
    """Integrate f over [breakpoints[0], breakpoints[-1]] with GL panels.

    Panels are the consecutive intervals; long ones are subdivided to
    width <= 0.5 so that exponential integrands stay well resolved.
    """
    total = 0.0
    for a, b in zip(breakpoints[:-1], breakpoints[1:]):
        if b <= a:
            continue
        nsub = max(1, int(np.ceil((b - a) / 0.5)))
        edges = np.linspace(a, b, nsub + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = 0.5 * (hi - lo)
            mid = 0.5 * (hi + lo)
            y = mid + half * _GL_NODES
            total += half * np.sum(_GL_WEIGHTS * f(y))
    return total


def _sinhc(x):
    """sinh(x)/x, stable near 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    out = np.where(small, 1.0 + x * x / 6.0, np.sinh(np.where(small, 1.0, x)) / np.where(small, 1.0, x))
    return out


def _sinhc_prime(x):
    """d/dx [sinh(x)/x], stable near 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 1.0, x)
    out = np.where(small, x / 3.0 + x ** 3 / 30.0, np.cosh(xs) / xs - np.sinh(xs) / xs ** 2)
    return out


@dataclass(frozen=True)
class Kernel:
    """Immutable dispersal kernel satisfying unit mass and zero mean.

    support: half-width S of the compact support, or None if unbounded.
    mgf_domain: open interval on which the MGF is finite.
    """

    family: str
    params: dict = field(compare=False)
    support: float | None
    mgf_domain: tuple[float, float]

    # -- density ---------------------------------------------------------
    def density(self, y):
        y = np.asarray(y, dtype=float)
        p = self.params
        if self.family == "uniform":
            R = p["half_width"]
            return np.where(np.abs(y) <= R, 1.0 / (2.0 * R), 0.0)
        if self.family == "two_bump":
            eta = p["eta"]
            out = np.zeros_like(y)
            for c, w in ((p["y_minus"], p["w_minus"]), (p["y_plus"], p["w_plus"])):
                out = out + np.where(np.abs(y - c) <= eta, w / (2.0 * eta), 0.0)
            return out
        if self.family == "laplace":
            c = p["rate"]
            return 0.5 * c * np.exp(-c * np.abs(y))
        if self.family == "gaussian":
            s = p["sigma"]
            return np.exp(-0.5 * (y / s) ** 2) / (s * np.sqrt(2.0 * np.pi))
        if self.family == "tabulated":
            return np.interp(y, p["offsets"], p["densities"], left=0.0, right=0.0)
        raise ValueError(f"unknown kernel family {self.family!r}")

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        p = self.params
        if self.family == "uniform":
            R = p["half_width"]
            return np.clip((y + R) / (2.0 * R), 0.0, 1.0)
        if self.family == "two_bump":
            eta = p["eta"]
            out = np.zeros_like(y)
            for c, w in ((p["y_minus"], p["w_minus"]), (p["y_plus"], p["w_plus"])):
                out = out + w * np.clip((y - c + eta) / (2.0 * eta), 0.0, 1.0)
            return out
        if self.family == "laplace":
            c = p["rate"]
            return np.where(y < 0, 0.5 * np.exp(c * np.minimum(y, 0.0)),
                            1.0 - 0.5 * np.exp(-c * np.maximum(y, 0.0)))
        if self.family == "gaussian":
            s = p["sigma"]
            return 0.5 * (1.0 + erf(y / (s * np.sqrt(2.0))))
        if self.family == "tabulated":
            return np.interp(y, p["offsets"], p["cdf"], left=0.0, right=1.0)
        raise ValueError(f"unknown kernel family {self.family!r}")

    def density_breakpoints(self):
        """Points where the density is non-smooth (for quadrature splitting)."""
        p = self.params
        if self.family == "uniform":
            R = p["half_width"]
            return [-R, R]
        if self.family == "two_bump":
            eta = p["eta"]
            return sorted([p["y_minus"] - eta, p["y_minus"] + eta,
                           p["y_plus"] - eta, p["y_plus"] + eta])
        if self.family == "laplace":
            return [0.0]
        if self.family == "gaussian":
            return []
        if self.family == "tabulated":
            return [p["offsets"][0], p["offsets"][-1]]
        raise ValueError(self.family)

    def truncation_radius(self, tail_mass=1e-16, lam=0.0):
        """Radius R such that the integrand J(y) e^{lam y} outside [-R, R]
        contributes a negligible tail (mass <= tail_mass per side at lam=0,
        with an exponential-tilt allowance for lam != 0)."""
        if self.support is not None:
            return self.support
        p = self.params
        if self.family == "laplace":
            c = p["rate"]
            gap = max(c - abs(lam), 1e-3 * c)
            return max(-np.log(tail_mass), 1.0) / gap
        if self.family == "gaussian":
            s = p["sigma"]
            return abs(lam) * s * s + s * np.sqrt(2.0 * max(-np.log(tail_mass), 1.0))
        raise ValueError(self.family)


def _check_straddle(y_minus, y_plus):
    if not (y_minus < 0.0 < y_plus):
        raise ValueError("two-bump centers must straddle 0: y_minus < 0 < y_plus")


def uniform_kernel(half_width):
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    return Kernel("uniform", {"half_width": float(half_width)},
                  support=float(half_width), mgf_domain=(-INF, INF))


def two_bump_kernel(y_minus, y_plus, eta):
    """Two uniform bumps; weights solved so the kernel has zero mean."""
    _check_straddle(y_minus, y_plus)
    if eta <= 0:
        raise ValueError("eta must be positive")
    # w- * y- + w+ * y+ = 0, w- + w+ = 1
    w_minus = y_plus / (y_plus - y_minus)
    w_plus = -y_minus / (y_plus - y_minus)
    S = max(abs(y_minus), abs(y_plus)) + eta
    return Kernel("two_bump",
                  {"y_minus": float(y_minus), "y_plus": float(y_plus),
                   "eta": float(eta), "w_minus": w_minus, "w_plus": w_plus},
                  support=S, mgf_domain=(-INF, INF))


def laplace_kernel(rate):
    if rate <= 0:
        raise ValueError("rate must be positive")
    c = float(rate)
    return Kernel("laplace", {"rate": c}, support=None, mgf_domain=(-c, c))


def gaussian_kernel(sigma):
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return Kernel("gaussian", {"sigma": float(sigma)}, support=None,
                  mgf_domain=(-INF, INF))


def tabulated_kernel(offsets, densities):
    """Kernel from a tabulated density; normalized to unit mass and
    re-centered to zero mean at construction."""
    y = np.asarray(offsets, dtype=float)
    J = np.asarray(densities, dtype=float)
    if y.ndim != 1 or y.shape != J.shape or y.size < 3:
        raise ValueError("offsets and densities must be 1-d arrays of equal length >= 3")
    if np.any(np.diff(y) <= 0):
        raise ValueError("offsets must be strictly increasing")
    if np.any(J < 0):
        raise ValueError("densities must be nonnegative")
    mass = np.trapezoid(J, y)
    if mass <= 0:
        raise ValueError("density integrates to zero")
    J = J / mass
    mean = np.trapezoid(J * y, y)
    y = y - mean
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (J[1:] + J[:-1]) * np.diff(y))])
    cdf /= cdf[-1]
    S = max(abs(y[0]), abs(y[-1]))
    return Kernel("tabulated", {"offsets": y, "densities": J, "cdf": cdf},
                  support=S, mgf_domain=(-INF, INF))


def tabulated_kernel_from_csv(path):
    offsets, densities = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                offsets.append(float(row[0]))
                densities.append(float(row[1]))
            except ValueError:
                continue  # header line
    return tabulated_kernel(offsets, densities)


def kernel_from_config(cfg):
    """Build a kernel from a config mapping {"family": ..., parameters...}."""
    cfg = dict(cfg)
    family = cfg.pop("family", None)
    makers = {
        "uniform": (uniform_kernel, {"half_width"}),
        "two_bump": (two_bump_kernel, {"y_minus", "y_plus", "eta"}),
        "laplace": (laplace_kernel, {"rate"}),
        "gaussian": (gaussian_kernel, {"sigma"}),
    }
    if family == "tabulated":
        if set(cfg) != {"path"}:
            raise ValueError("tabulated kernel config takes exactly {'path'}")
        return tabulated_kernel_from_csv(cfg["path"])
    if family not in makers:
        raise ValueError(f"unknown kernel family {family!r}")
    maker, keys = makers[family]
    if set(cfg) != keys:
        raise ValueError(f"kernel family {family!r} takes parameters {sorted(keys)}, got {sorted(cfg)}")
    return maker(**cfg)


# ---------------------------------------------------------------------------
# Moment-generating function and exponential moments
# ---------------------------------------------------------------------------

def mgf(kernel, lam):
    """I(lam) = int J(y) e^{lam y} dy; +inf outside the open MGF domain."""
    lo, hi = kernel.mgf_domain
    if not (lo < lam < hi):
        return INF
    p = kernel.params
    if kernel.family == "uniform":
        return float(_sinhc(lam * p["half_width"]))
    if kernel.family == "two_bump":
        eta = p["eta"]
        u = _sinhc(lam * eta)
        return float(p["w_minus"] * np.exp(lam * p["y_minus"]) * u
                     + p["w_plus"] * np.exp(lam * p["y_plus"]) * u)
    if kernel.family == "laplace":
        c = p["rate"]
        return c * c / (c * c - lam * lam)
    if kernel.family == "gaussian":
        with np.errstate(over="ignore"):
            return float(np.exp(0.5 * (lam * p["sigma"]) ** 2))
    if kernel.family == "tabulated":
        return mgf_quadrature(kernel, lam)
    raise ValueError(kernel.family)


def mgf_quadrature(kernel, lam):
    """MGF by panel quadrature of the density (oracle for closed forms)."""
    R = kernel.truncation_radius(lam=lam)
    brk = sorted({-R, R, *[b for b in kernel.density_breakpoints() if -R < b < R]})
    return _panel_quad(lambda y: kernel.density(y) * np.exp(lam * y), brk)


def mgf_derivative(kernel, lam):
    """I'(lam) = int J(y) y e^{lam y} dy, for lam strictly inside the domain."""
    lo, hi = kernel.mgf_domain
    if not (lo < lam < hi):
        raise ValueError(f"lambda={lam} outside open MGF domain ({lo}, {hi})")
    p = kernel.params
    if kernel.family == "uniform":
        R = p["half_width"]
        return float(R * _sinhc_prime(lam * R))
    if kernel.family == "two_bump":
        eta = p["eta"]
        u = _sinhc(lam * eta)
        du = eta * _sinhc_prime(lam * eta)
        tot = 0.0
        for c, w in ((p["y_minus"], p["w_minus"]), (p["y_plus"], p["w_plus"])):
            tot += w * np.exp(lam * c) * (c * u + du)
        return float(tot)
    if kernel.family == "laplace":
        c = p["rate"]
        return 2.0 * c * c * lam / (c * c - lam * lam) ** 2
    if kernel.family == "gaussian":
        s = p["sigma"]
        return float(lam * s * s * np.exp(0.5 * (lam * s) ** 2))
    if kernel.family == "tabulated":
        return exp_moment(kernel, lam, 1)
    raise ValueError(kernel.family)


def exp_moment(kernel, lam, order):
    """int J(y) y^order e^{lam y} dy by panel quadrature."""
    lo, hi = kernel.mgf_domain
    if not (lo < lam < hi):
        raise ValueError(f"lambda={lam} outside open MGF domain ({lo}, {hi})")
    R = kernel.truncation_radius(lam=lam)
    brk = sorted({-R, R, *[b for b in kernel.density_breakpoints() if -R < b < R]})
    return _panel_quad(lambda y: kernel.density(y) * y ** order * np.exp(lam * y), brk)


# ---------------------------------------------------------------------------
# Discretization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteKernel:
    """Quadrature stencil for the dispersal convolution."""

    h: float
    offsets: np.ndarray
    weights: np.ndarray
    tail_mass: float

    def first_moment(self):
        return float(np.sum(self.weights * self.offsets))


def discretize_kernel(kernel, h, eps_tail=1e-12):
    """Midpoint-rule stencil on cells tiling the (possibly truncated) support.

    Cell masses are exact (via the CDF); the result is renormalized to unit
    sum and re-centered to zero first moment.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if not (0.0 <= eps_tail < 1.0):
        raise ValueError("eps_tail must be in [0, 1)")
    if kernel.support is not None:
        R = kernel.support
        tail = 0.0
    else:
        if eps_tail <= 0:
            raise ValueError("eps_tail must be positive for unbounded kernels")
        R = _quantile_radius(kernel, eps_tail)
        tail = eps_tail
    n = max(int(np.ceil(2.0 * R / h)), 1)
    edges = -R + h * np.arange(n + 1)
    edges[-1] = R
    masses = np.diff(kernel.cdf(edges))
    offsets = 0.5 * (edges[:-1] + edges[1:])
    keep = masses > 0
    offsets, masses = offsets[keep], masses[keep]
    if offsets.size < 3:
        raise ValueError("discretized kernel has fewer than 3 points; decrease h")
    weights = masses / masses.sum()
    offsets = offsets - np.sum(weights * offsets)
    return DiscreteKernel(h=float(h), offsets=offsets, weights=weights, tail_mass=tail)


def _quantile_radius(kernel, eps_tail):
    """Symmetric radius discarding at most eps_tail total mass."""
    R = 1.0
    while kernel.cdf(-R) + (1.0 - kernel.cdf(R)) > eps_tail:
        R *= 1.5
        if R > 1e9:
            raise ValueError("kernel tail does not decay; cannot truncate")
    return float(R)


def aligned_weights(kernel, h, eps_tail=1e-14):
    """Grid-aligned stencil: weight m is the exact mass of the cell
    [m*h - h/2, m*h + h/2].  Returns (halfwidth M, weights of length 2M+1).

    Nonnegative, unit sum; first moment is O(h^2) for asymmetric kernels.
    Used by the time simulator (second-order accurate for smooth profiles).
    """
    R = kernel.support if kernel.support is not None else _quantile_radius(kernel, eps_tail)
    M = int(np.ceil(R / h + 0.5))
    edges = (np.arange(-M, M + 2) - 0.5) * h
    masses = np.diff(kernel.cdf(edges))
    w = masses / masses.sum()
    return M, w


def aligned_weights_highorder(kernel, h, eps_tail=1e-16):
    """Grid-aligned stencil exact for cubic interpolants of the profile.

    Each density quadrature node distributes its weight J(y) w_q onto the
    four surrounding grid nodes with cubic Lagrange cardinal weights, so
    that sum_m w_m phi(m h) reproduces int J(y) phi(y) dy with O(h^4)
    error for smooth phi.  Weights may be slightly negative near support
    edges.  Returns (halfwidth M, weights of length 2M+1).
    """
    R = kernel.support if kernel.support is not None else _quantile_radius(kernel, eps_tail)
    M = int(np.ceil(R / h)) + 2
    w = np.zeros(2 * M + 1)
    brk = sorted({-R, R, *[b for b in kernel.density_breakpoints() if -R < b < R]})
    # cell edges of the grid, split at density breakpoints
    cell_edges = np.arange(-M, M) * h
    pts = np.unique(np.concatenate([cell_edges, brk]))
    pts = pts[(pts >= -R - h) & (pts <= R + h)]
    for a, b in zip(pts[:-1], pts[1:]):
        if b - a < 1e-15:
            continue
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        y = mid + half * _GL_NODES
        q = half * _GL_WEIGHTS * kernel.density(y)
        j = np.floor(y / h).astype(int)  # cell index: y in [j h, (j+1) h)
        t = y / h - j                    # in [0, 1)
        # cubic Lagrange on nodes j-1, j, j+1, j+2 at parameter t
        l0 = -t * (t - 1.0) * (t - 2.0) / 6.0
        l1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
        l2 = -(t + 1.0) * t * (t - 2.0) / 2.0
        l3 = (t + 1.0) * t * (t - 1.0) / 6.0
        for dk, lk in ((-1, l0), (0, l1), (1, l2), (2, l3)):
            np.add.at(w, j + dk + M, q * lk)
    w /= w.sum()
    return M, w


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_kernel(kernel, n_samples=2000):
    """Report on conditions: unit mass, zero mean, two-sided positivity,
    MGF finiteness window with blow-up at finite endpoints, compactness."""
    report = {"family": kernel.family, "checks": {}}
    checks = report["checks"]

    mass = mgf_quadrature(kernel, 0.0)
    checks["unit_mass"] = {"value": mass, "pass": abs(mass - 1.0) <= 1e-10}

    mean = exp_moment(kernel, 0.0, 1)
    checks["zero_mean"] = {"value": mean, "pass": abs(mean) <= 1e-10}

    # positivity on two intervals straddling 0
    R = kernel.truncation_radius(tail_mass=1e-6)
    ys = np.linspace(-R, R, n_samples)
    dens = kernel.density(ys)
    pos_neg = bool(np.any((ys < 0) & (dens > 0)))
    pos_pos = bool(np.any((ys > 0) & (dens > 0)))
    checks["two_sided_positivity"] = {"pass": pos_neg and pos_pos}

    lo, hi = kernel.mgf_domain
    finite_inside = all(np.isfinite(mgf(kernel, x))
                        for x in _interior_samples(lo, hi, 7))
    blow_up = True
    if np.isfinite(hi):
        blow_up &= mgf(kernel, hi * (1.0 - 1e-9)) > 1e6
    if np.isfinite(lo):
        blow_up &= mgf(kernel, lo * (1.0 - 1e-9)) > 1e6
    checks["mgf_window"] = {"domain": (lo, hi), "pass": bool(finite_inside and blow_up)}

    report["compact"] = kernel.support is not None
    report["support"] = kernel.support
    report["pass"] = all(c["pass"] for c in checks.values())
    return report


def _interior_samples(lo, hi, n):
    a = max(lo, -8.0) if np.isfinite(lo) else -8.0
    b = min(hi, 8.0) if np.isfinite(hi) else 8.0
    a, b = 0.9 * a, 0.9 * b
    return np.linspace(a, b, n)
