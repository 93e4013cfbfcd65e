"""Batch experiment pipeline behind the command-line interface.

A single JSON config describes model parameters, the three dispersal
kernels, the environment, the targeted regime, numerics, and outputs.  The
pipeline validates inputs, computes states and critical speeds, builds and
verifies the upper/lower profile pair for the regime, solves for the wave,
optionally cross-checks against the time simulator, classifies the outcome,
and writes a manifest listing every artifact with its checksum.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from pathlib import Path

import numpy as np

from . import bounds as _bounds
from . import environment as _env
from . import equilibria as _eq
from . import kernels as _kern
from . import simulator as _sim
from . import spectral as _spec
from . import wave_solver as _wave


class ConfigError(ValueError):
    """The config document is malformed or contains unknown keys."""


class NumericalError(RuntimeError):
    """A numerical stage (verification, solve, simulation) failed."""


REGIMES = ("e1", "e2", "e3", "e4",
           "critical-equal", "critical-s1", "critical-e2")

_TOP_KEYS = {"params", "kernels", "environment", "regime", "numerics",
             "outputs"}
_PARAM_KEYS = {"d1", "d2", "d3", "r1", "r2", "r3", "a", "b", "h", "k",
               "s", "s_factor"}
_NUMERIC_KEYS = {"L", "h", "dt", "tol", "max_iter", "eps_tail",
                 "sim_T", "sim_scheme", "verify_tol"}
_OUTPUT_KEYS = {"directory", "emit"}

_NUMERIC_DEFAULTS = {"L": 100.0, "h": 0.01, "dt": None, "tol": 1e-10,
                     "max_iter": 5000, "eps_tail": 1e-12, "sim_T": 200.0,
                     "sim_scheme": "rk3", "verify_tol": None}


@dataclasses.dataclass
class ExperimentConfig:
    params: dict
    kernels: list
    environment: dict
    regime: str
    numerics: dict
    outputs: dict

    def as_dict(self):
        return {"params": dict(self.params),
                "kernels": [dict(k) for k in self.kernels],
                "environment": dict(self.environment),
                "regime": self.regime,
                "numerics": dict(self.numerics),
                "outputs": dict(self.outputs)}


def _reject_unknown(mapping, allowed, where):
    extra = set(mapping) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def config_from_dict(doc):
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "config")
    for key in ("params", "kernels", "environment", "regime"):
        if key not in doc:
            raise ConfigError(f"config is missing required section {key!r}")

    params = doc["params"]
    if not isinstance(params, dict):
        raise ConfigError("params must be an object")
    _reject_unknown(params, _PARAM_KEYS, "params")
    if ("s" in params) == ("s_factor" in params):
        raise ConfigError("params must set exactly one of 's' and 's_factor'")
    missing = (_PARAM_KEYS - {"s", "s_factor"}) - set(params)
    if missing:
        raise ConfigError(f"params is missing {sorted(missing)}")

    kernels = doc["kernels"]
    if not isinstance(kernels, list) or len(kernels) != 3:
        raise ConfigError("kernels must be a list of exactly 3 kernel specs")

    if not isinstance(doc["environment"], dict):
        raise ConfigError("environment must be an object")

    regime = doc["regime"]
    if regime not in REGIMES:
        raise ConfigError(f"regime must be one of {REGIMES}, got {regime!r}")

    numerics = dict(_NUMERIC_DEFAULTS)
    user_num = doc.get("numerics", {})
    if not isinstance(user_num, dict):
        raise ConfigError("numerics must be an object")
    _reject_unknown(user_num, _NUMERIC_KEYS, "numerics")
    numerics.update(user_num)
    for key in ("L", "h", "tol", "eps_tail", "sim_T"):
        if not (isinstance(numerics[key], (int, float))
                and numerics[key] > 0):
            raise ConfigError(f"numerics.{key} must be a positive number")
    if numerics["dt"] is not None and numerics["dt"] <= 0:
        raise ConfigError("numerics.dt must be positive or null")
    if numerics["verify_tol"] is not None and numerics["verify_tol"] <= 0:
        raise ConfigError("numerics.verify_tol must be positive or null")
    if not (isinstance(numerics["max_iter"], int)
            and numerics["max_iter"] > 0):
        raise ConfigError("numerics.max_iter must be a positive integer")
    if numerics["sim_scheme"] not in ("euler", "rk3"):
        raise ConfigError("numerics.sim_scheme must be 'euler' or 'rk3'")

    outputs = {"directory": None, "emit": []}
    user_out = doc.get("outputs", {})
    if not isinstance(user_out, dict):
        raise ConfigError("outputs must be an object")
    _reject_unknown(user_out, _OUTPUT_KEYS, "outputs")
    outputs.update(user_out)
    bad = set(outputs["emit"]) - {"csv", "json", "png"}
    if bad:
        raise ConfigError(f"unknown emit flags: {sorted(bad)}")

    return ExperimentConfig(params=dict(params),
                            kernels=[dict(k) for k in kernels],
                            environment=dict(doc["environment"]),
                            regime=regime, numerics=numerics,
                            outputs=outputs)


def load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(doc)


def swap_roles_e3(config):
    """Exchange the two predators so the e3 target runs on e2 machinery.

    Swaps (d1, r1, k, first kernel) with (d2, r2, h, second kernel); an
    involution, and the identity for symmetric configs.
    """
    doc = config.as_dict()
    p = doc["params"]
    p["d1"], p["d2"] = p["d2"], p["d1"]
    p["r1"], p["r2"] = p["r2"], p["r1"]
    p["h"], p["k"] = p["k"], p["h"]
    doc["kernels"] = [doc["kernels"][1], doc["kernels"][0], doc["kernels"][2]]
    return config_from_dict(doc)


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

def resolve_verify_tol(config):
    """Pair verification tolerance: closed-form pairs verify to 1e-8; the
    co-existence pair's lower profiles come from a numerical scalar solve,
    so their slack is solver-residual limited."""
    tol = config.numerics["verify_tol"]
    if tol is not None:
        return tol
    return 1e-5 if config.regime == "e4" else 1e-8


def _build_inputs(config):
    try:
        kernels = tuple(_kern.kernel_from_config(c) for c in config.kernels)
        env = _env.env_from_config(config.environment)
    except (ValueError, OSError) as exc:
        raise ConfigError(str(exc)) from exc
    for J in kernels:
        report = _kern.validate_kernel(J)
        if not report["pass"]:
            raise ConfigError(f"kernel failed validation: {report}")
    env_report = _env.check_env_conditions(env)
    if not env_report["pass"]:
        raise ConfigError(f"environment failed validation: {env_report}")
    return kernels, env


def _resolve_params(config, kernels):
    p = dict(config.params)
    factor = p.pop("s_factor", None)
    base = _eq.ModelParams(s=1.0, **{k: v for k, v in p.items() if k != "s"})
    base.validate()
    a = base.a
    sp1 = _spec.critical_speed(kernels[0], base.d1, base.r1 * (a - 1.0))
    sp2 = _spec.critical_speed(kernels[1], base.d2, base.r2 * (a - 1.0))
    states0 = _eq.compute_states(base)
    sp2m = _spec.critical_speed(kernels[1], base.d2, base.r2 * states0.beta2)
    if factor is not None:
        s = factor * max(sp1.s_crit, sp2.s_crit)
    else:
        s = p["s"]
    if config.regime == "critical-equal":
        s = max(sp1.s_crit, sp2.s_crit)
    elif config.regime == "critical-s1":
        s = sp1.s_crit
    elif config.regime == "critical-e2":
        s = sp2m.s_crit
    params = dataclasses.replace(base, s=float(s))
    params.validate()
    return params, (sp1, sp2, sp2m)


_REGIME_GATES = {"e1": "e1", "e2": "e2", "e3": "e2", "e4": "e4",
                 "critical-equal": "critical_equal_speeds",
                 "critical-s1": "critical_s1_dominant",
                 "critical-e2": "critical_e2"}


def _gate_regime(regime, params, env, kernels):
    report = _eq.check_regimes(params, env, kernels)
    gate = report["regimes"][_REGIME_GATES[regime]]
    if not gate["pass"]:
        raise _bounds.RegimeError(
            f"requested regime {regime!r} fails its gate: {gate}; "
            f"conditions: { {k: v['pass'] for k, v in report['conditions'].items()} }")
    return report


def _build_pair(regime, params, env, kernels, grid, tol, max_iter):
    if regime == "e1":
        return _bounds.build_bounds_E1(params, env, kernels)
    if regime in ("e2", "e3"):
        return _bounds.build_bounds_E2(params, env, kernels)
    if regime == "e4":
        scalar = _wave.make_scalar_solver(grid, tol=tol, max_iter=max_iter)
        return _bounds.build_bounds_E4(params, env, kernels, scalar)
    case = {"critical-equal": "equal_speeds", "critical-s1": "s1_dominant",
            "critical-e2": "E2_critical"}[regime]
    return _bounds.build_bounds_critical(params, env, kernels, case=case)


_TARGET_STATE = {"e1": "E1", "e2": "E2", "e3": "E3", "e4": "E4",
                 "critical-equal": "E1", "critical-s1": "E1",
                 "critical-e2": "E2"}


class _Artifacts:
    def __init__(self, outdir, emit):
        self.outdir = Path(outdir) if outdir else None
        self.emit = set(emit)
        self.files = {}
        if self.outdir is not None:
            self.outdir.mkdir(parents=True, exist_ok=True)

    def want(self, kind):
        return self.outdir is not None and kind in self.emit

    def _register(self, path):
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        self.files[path.name] = digest

    def write_json(self, name, payload):
        if not self.want("json"):
            return
        path = self.outdir / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True,
                                   default=_jsonable) + "\n")
        self._register(path)

    def write_csv(self, name, header, table):
        if not self.want("csv"):
            return
        path = self.outdir / name
        np.savetxt(path, np.asarray(table), delimiter=",", fmt="%.17g",
                   header=header, comments="")
        self._register(path)

    def write_manifest(self, manifest):
        if self.outdir is None:
            return
        path = self.outdir / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True,
                                   default=_jsonable) + "\n")

    def savefig(self, name, fig):
        if not self.want("png"):
            return
        import matplotlib
        path = self.outdir / name
        fig.savefig(path, dpi=110)
        self._register(path)


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _plot_speeds(art, speed_results):
    if not art.want("png"):
        return
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = ("first predator", "second predator", "second predator, mixed")
    for sp, label in zip(speed_results, labels):
        ax.plot(sp.lam_grid, sp.Q_vals, label=f"{label}")
        ax.plot([sp.lam_crit], [sp.s_crit], "o", ms=4)
    ax.set_xlabel("decay rate")
    ax.set_ylabel("required speed")
    ax.set_xscale("log")
    ax.legend(fontsize=8)
    ax.set_title("speed functionals and their minima")
    fig.tight_layout()
    art.savefig("speeds.png", fig)
    plt.close(fig)


def _plot_profiles(art, name, z, curves, title):
    if not art.want("png"):
        return
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, values, style in curves:
        ax.plot(z, values, style, label=label, lw=1.2)
    ax.set_xlabel("moving-frame coordinate")
    ax.set_ylabel("density")
    ax.legend(fontsize=8, ncol=2)
    ax.set_title(title)
    fig.tight_layout()
    art.savefig(name, fig)
    plt.close(fig)


def run_experiment(config, cross_check=False):
    """Run the full pipeline; returns the manifest dictionary.

    On stage failure the manifest records 'failed_at' and the reason, the
    partial artifacts are kept, and the exception propagates.
    """
    swapped = config.regime == "e3"
    work_config = swap_roles_e3(config) if swapped else config

    art = _Artifacts(config.outputs.get("directory"),
                     config.outputs.get("emit", []))
    manifest = {"regime": config.regime, "files": art.files,
                "failed_at": None, "config": config.as_dict()}

    def fail(stage, exc):
        manifest["failed_at"] = stage
        manifest["reason"] = str(exc)
        art.write_manifest(manifest)
        raise exc

    # --- validation ------------------------------------------------------
    try:
        kernels, env = _build_inputs(work_config)
        params, speed_results = _resolve_params(work_config, kernels)
    except (ConfigError, ValueError) as exc:
        fail("validate", exc if isinstance(exc, ConfigError)
             else ConfigError(str(exc)))

    # --- states and speeds -----------------------------------------------
    states = _eq.compute_states(params)
    sp1, sp2, sp2m = speed_results
    speeds_payload = {
        "s": params.s,
        "s_star_1": sp1.s_crit, "lambda_star_1": sp1.lam_crit,
        "s_star_2": sp2.s_crit, "lambda_star_2": sp2.lam_crit,
        "s_star_star_2": sp2m.s_crit, "lambda_star_star_2": sp2m.lam_crit,
        "states": {"E1": states.E1, "E2": states.E2, "E3": states.E3,
                   "E4": states.E4},
        "swapped_predators": swapped,
    }
    manifest["speeds"] = {k: speeds_payload[k] for k in
                          ("s", "s_star_1", "s_star_2", "s_star_star_2")}
    art.write_json("speeds.json", speeds_payload)
    _plot_speeds(art, speed_results)

    # --- regime gate ------------------------------------------------------
    try:
        regime_report = _gate_regime(config.regime, params, env, kernels)
    except _bounds.RegimeError as exc:
        fail("regime_gate", exc)
    art.write_json("regime_report.json", regime_report)

    num = config.numerics
    grid = np.arange(-num["L"], num["L"] + 0.5 * num["h"], num["h"])

    # --- bounds -----------------------------------------------------------
    try:
        pair = _build_pair(config.regime, params, env, kernels, grid,
                           num["tol"], num["max_iter"])
        verify = _bounds.verify_bounds(pair, params, env, kernels, grid,
                                       tol=resolve_verify_tol(config))
    except _bounds.RegimeError as exc:
        fail("bounds", exc)
    except (ValueError, RuntimeError) as exc:
        fail("bounds", NumericalError(str(exc)))
    manifest["bounds_pass"] = verify["pass"]
    art.write_json("bounds_report.json", verify)
    table = pair.profile_table(grid)
    art.write_csv("bounds.csv",
                  "z,upper1,upper2,upper3,lower1,lower2,lower3", table)
    _maybe_plot_bounds(art, grid, table, swapped)
    if not verify["pass"]:
        fail("bounds", NumericalError(f"pair verification failed: "
                                      f"{verify['inequalities']}"))

    # --- wave solve -------------------------------------------------------
    try:
        ctx = _wave.make_context(params, env, pair, grid, tol=num["tol"],
                                 max_iter=num["max_iter"])
        profile = _wave.solve_wave(pair, ctx, params, env, kernels, grid)
    except (ValueError, RuntimeError) as exc:
        fail("solve", NumericalError(str(exc)))
    if not profile.metadata.get("converged", False):
        fail("solve", NumericalError(
            f"wave solve did not converge: {profile.metadata}"))
    manifest["solve"] = profile.metadata
    phi_out = profile.phi[[1, 0, 2]] if swapped else profile.phi
    res_out = profile.residual[[1, 0, 2]] if swapped else profile.residual
    art.write_csv("profile.csv", "z,phi1,phi2,phi3,res1,res2,res3",
                  np.column_stack([grid, *phi_out, *res_out]))
    _plot_profiles(art, "profile.png", grid,
                   [("first predator", phi_out[0], "-"),
                    ("second predator", phi_out[1], "-"),
                    ("prey", phi_out[2], "-")],
                   f"solved wave profile ({config.regime})")

    # --- classification (and optional simulator cross-check) -------------
    target = _TARGET_STATE[config.regime]
    if swapped:
        # machinery ran on the swapped system: its E2 is the original E3
        classify_phi = profile.phi
    else:
        classify_phi = phi_out
    label = _sim.classify_limit(classify_phi, states, tol=1e-2)
    expected = "E2" if swapped else target
    manifest["classification"] = _unswap_label(label, swapped)
    manifest["classification_matches_regime"] = (label == expected)

    if cross_check:
        try:
            limits = ((0.0, 0.0, 0.0), getattr(states, expected))
            traj = _sim.run_moving_frame(
                (pair, grid), num["sim_T"], params, env, kernels,
                dt=num["dt"], scheme=num["sim_scheme"], limits=limits)
        except (_sim.BlowUpError, _sim.DomainError) as exc:
            fail("simulate", NumericalError(str(exc)))
        n = len(grid)
        lo, hi = n // 10, n - n // 10
        gap = float(np.max(np.abs(traj.final.fields[:, lo:hi]
                                  - profile.phi[:, lo:hi])))
        sim_label = _sim.classify_limit(traj.final, states, tol=1e-2)
        manifest["cross_check"] = {
            "sup_distance_middle80": gap,
            "agrees_1e-3": bool(gap <= 1e-3),
            "freeze_metric": traj.diagnostics["freeze_metric"],
            "frozen": traj.diagnostics["frozen"],
            "clip_count": traj.diagnostics["clip_count"],
            "classification": _unswap_label(sim_label, swapped),
        }
        sim_out = traj.final.fields[[1, 0, 2]] if swapped \
            else traj.final.fields
        art.write_csv("simulation.csv", "z,u,v,w",
                      np.column_stack([grid, *sim_out]))
        _plot_profiles(art, "simulation.png", grid,
                       [("first predator", sim_out[0], "-"),
                        ("second predator", sim_out[1], "-"),
                        ("prey", sim_out[2], "-")],
                       f"moving-frame simulation at T={num['sim_T']}")

    art.write_manifest(manifest)
    return manifest


def _unswap_label(label, swapped):
    if not swapped:
        return label
    return {"E2": "E3", "E3": "E2"}.get(label, label)


def _maybe_plot_bounds(art, grid, table, swapped):
    cols = table[:, 1:].T
    if swapped:
        cols = cols[[1, 0, 2, 4, 3, 5]]
    _plot_profiles(
        art, "bounds.png", grid,
        [("upper, first predator", cols[0], "-"),
         ("upper, second predator", cols[1], "-"),
         ("upper, prey", cols[2], "-"),
         ("lower, first predator", cols[3], "--"),
         ("lower, second predator", cols[4], "--"),
         ("lower, prey", cols[5], "--")],
        "upper/lower profile pair")
