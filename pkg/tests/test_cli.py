import hashlib
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from shiftwave import cli, pipeline


def _base_config(regime="e1", **extra):
    cfg = {
        "params": {"d1": 1.0, "d2": 1.0, "d3": 1.0, "r1": 1.0, "r2": 1.0,
                   "r3": 1.0, "a": 2.0, "b": 0.1, "h": 0.5, "k": 0.5,
                   "s_factor": 1.2},
        "kernels": [{"family": "uniform", "half_width": 1.0}] * 3,
        "environment": {"family": "tanh_ramp", "alpha_minus": -0.5,
                        "alpha_plus": 1.0, "steepness": 1.0},
        "regime": regime,
        "numerics": {"L": 60.0, "h": 0.05},
        "outputs": {"emit": ["csv", "json"]},
    }
    for key, val in extra.items():
        cfg[key] = val
    return cfg


def _write(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


@pytest.fixture()
def runner():
    return CliRunner()


def test_validate_ok(tmp_path, runner):
    path = _write(tmp_path, _base_config())
    result = runner.invoke(cli.main, ["validate", "--config", path])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["config"] == "ok"
    assert payload["environment"] is True
    assert all(payload["kernels"])


def test_unknown_config_key_exits_2(tmp_path, runner):
    cfg = _base_config()
    cfg["extra_section"] = {}
    path = _write(tmp_path, cfg)
    result = runner.invoke(cli.main, ["validate", "--config", path])
    assert result.exit_code == 2


def test_bad_numerics_key_exits_2(tmp_path, runner):
    cfg = _base_config()
    cfg["numerics"]["step"] = 0.1
    path = _write(tmp_path, cfg)
    result = runner.invoke(cli.main, ["validate", "--config", path])
    assert result.exit_code == 2


def test_regime_gate_exits_3(tmp_path, runner):
    cfg = _base_config(regime="e4")
    cfg["params"]["b"] = 0.3  # violates the small-predation gate
    path = _write(tmp_path, cfg)
    out = tmp_path / "out"
    result = runner.invoke(cli.main, ["bounds", "--config", path,
                                      "--out", str(out)])
    assert result.exit_code == 3
    assert "regime gate" in result.output


def test_speeds_command(tmp_path, runner):
    path = _write(tmp_path, _base_config())
    out = tmp_path / "out"
    result = runner.invoke(cli.main, ["speeds", "--config", path,
                                      "--out", str(out)])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["s_star_1"] == pytest.approx(0.9052617393690583,
                                                abs=1e-9)
    assert payload["s"] == pytest.approx(1.2 * payload["s_star_1"])
    assert (out / "speeds.json").exists()


def test_run_pipeline_end_to_end(tmp_path, runner):
    path = _write(tmp_path, _base_config())
    out = tmp_path / "run1"
    result = runner.invoke(cli.main, ["run", "--config", path,
                                      "--out", str(out)])
    assert result.exit_code == 0, result.output
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["classification"] == "E1"
    assert manifest["classification_matches_regime"]
    assert manifest["bounds_pass"]
    assert manifest["solve"]["converged"]
    # every registered artifact exists with the recorded checksum
    for name, sha in manifest["files"].items():
        blob = (out / name).read_bytes()
        assert hashlib.sha256(blob).hexdigest() == sha


def test_runs_are_reproducible(tmp_path, runner):
    path = _write(tmp_path, _base_config())
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        result = runner.invoke(cli.main, ["run", "--config", path,
                                          "--out", str(out)])
        assert result.exit_code == 0, result.output
        outs.append(out)
    for fname in ("bounds.csv", "profile.csv"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


def test_classify_command(tmp_path, runner):
    path = _write(tmp_path, _base_config())
    out = tmp_path / "out"
    result = runner.invoke(cli.main, ["solve", "--config", path,
                                      "--out", str(out)])
    assert result.exit_code == 0, result.output
    result = runner.invoke(cli.main, ["classify", "--config", path,
                                      "--profile", str(out / "profile.csv")])
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["classification"] == "E1"


def test_swap_roles_e3_involution():
    config = pipeline.config_from_dict(_base_config(regime="e3"))
    config.params["d1"], config.params["r2"] = 1.5, 0.7
    config.params["h"], config.params["k"] = 0.3, 0.6
    swapped = pipeline.swap_roles_e3(config)
    assert swapped.params["d2"] == 1.5
    assert swapped.params["r1"] == 0.7
    assert swapped.params["h"] == 0.6 and swapped.params["k"] == 0.3
    back = pipeline.swap_roles_e3(swapped)
    assert back.params == config.params


def test_sweep_serial(tmp_path, runner):
    cfg_a = _write(tmp_path, _base_config(), "expA.json")
    cfg_b = _write(tmp_path, _base_config(), "expB.json")
    parent = tmp_path / "sweep"
    result = runner.invoke(cli.main, ["sweep", "--config", cfg_a,
                                      "--config", cfg_b,
                                      "--out", str(parent)])
    assert result.exit_code == 0, result.output
    assert (parent / "expA" / "manifest.json").exists()
    assert (parent / "expB" / "manifest.json").exists()


def test_empty_emit_writes_manifest_only(tmp_path, runner):
    cfg = _base_config()
    cfg["outputs"]["emit"] = []
    path = _write(tmp_path, cfg)
    out = tmp_path / "out"
    result = runner.invoke(cli.main, ["run", "--config", path,
                                      "--out", str(out)])
    assert result.exit_code == 0, result.output
    files = sorted(p.name for p in Path(out).iterdir())
    assert files == ["manifest.json"]
