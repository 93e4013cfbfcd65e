"""Command-line interface: batch experiment runner.

Exit codes: 0 success, 2 config error, 3 regime gate failure, 4 numerical
failure.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import bounds as _bounds
from . import environment as _env
from . import equilibria as _eq
from . import kernels as _kern
from . import pipeline as _pipe
from . import simulator as _sim

EXIT_CONFIG = 2
EXIT_REGIME = 3
EXIT_NUMERICAL = 4


def _echo_json(payload):
    click.echo(json.dumps(payload, indent=2, sort_keys=True,
                          default=_pipe._jsonable))


def _load(config_path, out, emit):
    try:
        config = _pipe.load_config(config_path)
    except _pipe.ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    if out is not None:
        config.outputs["directory"] = str(out)
    if emit:
        config.outputs["emit"] = sorted({f for part in emit
                                         for f in part.split(",") if f})
        bad = set(config.outputs["emit"]) - {"csv", "json", "png"}
        if bad:
            click.echo(f"config error: unknown emit flags {sorted(bad)}",
                       err=True)
            sys.exit(EXIT_CONFIG)
    return config


def _prepare(config):
    """Kernels, environment, resolved params, and the speed results."""
    try:
        kernels, env = _pipe._build_inputs(config)
        params, speeds = _pipe._resolve_params(config, kernels)
    except (_pipe.ConfigError, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    return kernels, env, params, speeds


_CONFIG_OPT = click.option("--config", "config_path", required=True,
                           type=click.Path(exists=True, dir_okay=False),
                           help="JSON experiment config.")
_OUT_OPT = click.option("--out", type=click.Path(file_okay=False),
                        default=None, help="Output directory override.")
_EMIT_OPT = click.option("--emit", multiple=True,
                         help="Artifact kinds: csv,json,png "
                              "(comma-separated, repeatable).")


@click.group()
def main():
    """Forced traveling waves in a shifting habitat: compute critical
    speeds, build and verify bound pairs, solve wave profiles, simulate,
    and classify outcomes."""


@main.command()
@_CONFIG_OPT
def validate(config_path):
    """Validate the config, kernels, environment, and base parameters."""
    config = _load(config_path, None, ())
    kernels, env, params, _ = _prepare(config)
    report = {
        "config": "ok",
        "kernels": [_kern.validate_kernel(J)["pass"] for J in kernels],
        "environment": _env.check_env_conditions(env)["pass"],
        "params": dataclasses.asdict(params),
        "regime": config.regime,
    }
    _echo_json(report)


@main.command()
@_CONFIG_OPT
@_OUT_OPT
@_EMIT_OPT
def speeds(config_path, out, emit):
    """Critical speeds, decay rates, and constant states."""
    config = _load(config_path, out, emit)
    kernels, env, params, (sp1, sp2, sp2m) = _prepare(config)
    states = _eq.compute_states(params)
    payload = {
        "s": params.s,
        "s_star_1": sp1.s_crit, "lambda_star_1": sp1.lam_crit,
        "s_star_2": sp2.s_crit, "lambda_star_2": sp2.lam_crit,
        "s_star_star_2": sp2m.s_crit, "lambda_star_star_2": sp2m.lam_crit,
        "states": {"E1": states.E1, "E2": states.E2, "E3": states.E3,
                   "E4": states.E4},
    }
    art = _pipe._Artifacts(config.outputs.get("directory"),
                           config.outputs.get("emit", []))
    art.write_json("speeds.json", payload)
    _pipe._plot_speeds(art, (sp1, sp2, sp2m))
    _echo_json(payload)


def _gate_or_exit(config, params, env, kernels):
    try:
        return _pipe._gate_regime(config.regime, params, env, kernels)
    except _bounds.RegimeError as exc:
        click.echo(f"regime gate: {exc}", err=True)
        sys.exit(EXIT_REGIME)


def _pair_or_exit(config, params, env, kernels, grid):
    num = config.numerics
    try:
        return _pipe._build_pair(config.regime, params, env, kernels, grid,
                                 num["tol"], num["max_iter"])
    except _bounds.RegimeError as exc:
        click.echo(f"regime gate: {exc}", err=True)
        sys.exit(EXIT_REGIME)
    except (ValueError, RuntimeError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)


def _grid(config):
    num = config.numerics
    return np.arange(-num["L"], num["L"] + 0.5 * num["h"], num["h"])


@main.command()
@_CONFIG_OPT
@_OUT_OPT
@_EMIT_OPT
def bounds(config_path, out, emit):
    """Build and verify the upper/lower profile pair for the regime."""
    config = _load(config_path, out, emit)
    work = _pipe.swap_roles_e3(config) if config.regime == "e3" else config
    kernels, env, params, _ = _prepare(work)
    _gate_or_exit(work, params, env, kernels)
    grid = _grid(work)
    pair = _pair_or_exit(work, params, env, kernels, grid)
    report = _bounds.verify_bounds(pair, params, env, kernels, grid,
                                   tol=_pipe.resolve_verify_tol(work))
    art = _pipe._Artifacts(config.outputs.get("directory"),
                           config.outputs.get("emit", []))
    art.write_json("bounds_report.json", report)
    table = pair.profile_table(grid)
    art.write_csv("bounds.csv",
                  "z,upper1,upper2,upper3,lower1,lower2,lower3", table)
    _pipe._maybe_plot_bounds(art, grid, table, config.regime == "e3")
    _echo_json({"pass": report["pass"], "ordering": report["ordering"],
                "inequalities": {k: v["worst"] for k, v in
                                 report["inequalities"].items()}})
    if not report["pass"]:
        sys.exit(EXIT_NUMERICAL)


@main.command()
@_CONFIG_OPT
@_OUT_OPT
@_EMIT_OPT
def solve(config_path, out, emit):
    """Solve for the traveling wave profile between the bounds."""
    config = _load(config_path, out, emit)
    manifest = _run_or_exit(config, cross_check=False)
    _echo_json({"solve": manifest["solve"],
                "classification": manifest["classification"]})


@main.command()
@_CONFIG_OPT
@_OUT_OPT
@_EMIT_OPT
@click.option("--frame", type=click.Choice(["moving", "fixed"]),
              default="moving", show_default=True)
def simulate(config_path, out, emit, frame):
    """Time-step the system from the lower-bound profiles."""
    config = _load(config_path, out, emit)
    work = _pipe.swap_roles_e3(config) if config.regime == "e3" else config
    kernels, env, params, _ = _prepare(work)
    _gate_or_exit(work, params, env, kernels)
    grid = _grid(work)
    pair = _pair_or_exit(work, params, env, kernels, grid)
    states = _eq.compute_states(params)
    num = work.numerics
    target = _pipe._TARGET_STATE["e2" if config.regime == "e3"
                                 else config.regime]
    try:
        traj = _sim.run_moving_frame(
            (pair, grid), num["sim_T"], params, env, kernels,
            dt=num["dt"], scheme=num["sim_scheme"],
            limits=((0.0, 0.0, 0.0), getattr(states, target)))
    except (_sim.BlowUpError, _sim.DomainError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    if frame == "fixed":
        click.echo("note: trajectory integrated in the moving frame; "
                   "sample at x = z + s t for fixed-frame values", err=True)
    label = _sim.classify_limit(traj.final, states, tol=1e-2)
    art = _pipe._Artifacts(config.outputs.get("directory"),
                           config.outputs.get("emit", []))
    swapped = config.regime == "e3"
    fields = traj.final.fields[[1, 0, 2]] if swapped else traj.final.fields
    art.write_csv("simulation.csv", "z,u,v,w",
                  np.column_stack([grid, *fields]))
    diag = dict(traj.diagnostics)
    diag.pop("sup_changes", None)
    diag["classification"] = _pipe._unswap_label(label, swapped)
    art.write_json("simulation_diagnostics.json", diag)
    _echo_json(diag)


@main.command()
@_CONFIG_OPT
@click.option("--profile", "profile_csv", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="CSV with columns z,phi1,phi2,phi3 (extra columns ok).")
@click.option("--tol", default=1e-2, show_default=True)
def classify(config_path, profile_csv, tol):
    """Classify a stored profile against the constant states."""
    config = _load(config_path, None, ())
    kernels, env, params, _ = _prepare(config)
    states = _eq.compute_states(params)
    data = np.loadtxt(profile_csv, delimiter=",", skiprows=1)
    phi = data[:, 1:4].T
    _echo_json({"classification": _sim.classify_limit(phi, states, tol)})


def _run_or_exit(config, cross_check):
    try:
        return _pipe.run_experiment(config, cross_check=cross_check)
    except _pipe.ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except _bounds.RegimeError as exc:
        click.echo(f"regime gate: {exc}", err=True)
        sys.exit(EXIT_REGIME)
    except (_pipe.NumericalError, _sim.BlowUpError,
            _sim.DomainError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)


@main.command()
@_CONFIG_OPT
@_OUT_OPT
@_EMIT_OPT
@click.option("--cross-check", is_flag=True, default=False,
              help="Also run the moving-frame simulator and compare.")
def run(config_path, out, emit, cross_check):
    """Full pipeline: validate, speeds, bounds, solve, classify."""
    config = _load(config_path, out, emit)
    manifest = _run_or_exit(config, cross_check)
    _echo_json(manifest)


def _sweep_one(args):
    path, out, emit, cross_check = args
    config = _pipe.load_config(path)
    config.outputs["directory"] = out
    if emit:
        config.outputs["emit"] = emit
    return _pipe.run_experiment(config, cross_check=cross_check)


@main.command()
@click.option("--config", "config_paths", required=True, multiple=True,
              type=click.Path(exists=True, dir_okay=False),
              help="One JSON config per experiment (repeatable).")
@click.option("--out", required=True, type=click.Path(file_okay=False),
              help="Parent directory; one subdirectory per experiment.")
@_EMIT_OPT
@click.option("--cross-check", is_flag=True, default=False)
@click.option("--jobs", default=1, show_default=True)
def sweep(config_paths, out, emit, cross_check, jobs):
    """Run several independent experiments, each in its own directory."""
    emit_flags = sorted({f for part in emit for f in part.split(",") if f})
    parent = Path(out)
    tasks = []
    for path in config_paths:
        sub = parent / Path(path).stem
        tasks.append((path, str(sub), emit_flags, cross_check))
    failures = 0
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = []
            for task in tasks:
                results.append(pool.submit(_sweep_one, task))
            for task, fut in zip(tasks, results):
                failures += _report_sweep(task[0], fut)
    else:
        for task in tasks:
            failures += _report_sweep(task[0], _Immediate(task))
    if failures:
        sys.exit(EXIT_NUMERICAL)


class _Immediate:
    def __init__(self, task):
        self._task = task

    def result(self):
        return _sweep_one(self._task)


def _report_sweep(path, fut):
    try:
        manifest = fut.result()
    except Exception as exc:  # sweep keeps going; summary reports failures
        click.echo(f"{path}: FAILED ({exc})", err=True)
        return 1
    click.echo(f"{path}: ok (classification "
               f"{manifest.get('classification')})")
    return 0


if __name__ == "__main__":
    main()
