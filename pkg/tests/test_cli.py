import json

import pytest
import yaml

from eeas.cli import ConfigError, main, resolve_config, run_sweep

FIG5 = {
    "seed": 2024,
    "topology": {"hops": 2, "stage_antennas": [1, 2, 1]},
    "strategies": ["fd-af", "fd-df", "dstbc"],
    "power_model": "total",
    "metrics": ["ber"],
    "snr_db": {"start": 0, "stop": 20, "step": 5},
    "trials": 20_000,
    "symbols_per_trial": 2,
}


@pytest.fixture
def fig5_file(tmp_path):
    path = tmp_path / "fig5.yaml"
    path.write_text(yaml.safe_dump(FIG5))
    return path


def _csvs(directory, manifest):
    return {k: (directory / v).read_bytes() for k, v in manifest["outputs"].items()}


def test_fig5_config_gives_three_ber_curves(fig5_file, tmp_path):
    out = tmp_path / "run"
    assert main(["--config", str(fig5_file), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert sorted(manifest["outputs"]) == ["ber_dstbc", "ber_fd-af", "ber_fd-df"]
    for name in manifest["outputs"].values():
        lines = (out / name).read_text().splitlines()
        assert lines[0] == "snr_db,metric,strategy,estimate,trials,events,ci_low,ci_high,stream"
        assert len(lines) == 6
    assert manifest["master_seed"] == 2024
    assert set(manifest["fitted_orders"]) == set(manifest["outputs"])
    assert manifest["wall_time_s"] >= 0
    assert "package_version" in manifest["build"]


def test_rerun_and_manifest_replay_are_byte_identical(fig5_file, tmp_path):
    a = run_sweep(fig5_file, tmp_path / "a")
    b = run_sweep(fig5_file, tmp_path / "b")
    assert _csvs(tmp_path / "a", a) == _csvs(tmp_path / "b", b)
    c = run_sweep(tmp_path / "a" / "manifest.json", tmp_path / "c")
    assert _csvs(tmp_path / "a", a) == _csvs(tmp_path / "c", c)
    assert c["config"] == a["config"]


def test_different_seed_changes_output(tmp_path):
    a = run_sweep(FIG5, tmp_path / "a")
    b = run_sweep(dict(FIG5, seed=2025), tmp_path / "b")
    assert _csvs(tmp_path / "a", a) != _csvs(tmp_path / "b", b)


def test_one_hop_is_rejected(fig5_file, tmp_path, capsys):
    bad = dict(FIG5, topology={"hops": 1, "stage_antennas": [1, 2]})
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(bad))
    assert main(["--config", str(path), "--out", str(tmp_path / "o")]) != 0
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "invalid-config"
    assert err["field"] == "topology.hops"


def test_missing_seed(tmp_path, capsys):
    path = tmp_path / "noseed.yaml"
    path.write_text(yaml.safe_dump({k: v for k, v in FIG5.items() if k != "seed"}))
    assert main(["--config", str(path), "--out", str(tmp_path / "o")]) != 0
    assert json.loads(capsys.readouterr().err)["error"] == "missing-seed"
    assert not (tmp_path / "o").exists()


def test_unsupported_combination(fig5_file, tmp_path, capsys):
    code = main(["--config", str(fig5_file), "--antennas", "2,2,2", "--out", str(tmp_path / "o")])
    assert code != 0
    assert json.loads(capsys.readouterr().err)["error"] == "unsupported-combination"


def test_flags_override_config(fig5_file, tmp_path):
    out = tmp_path / "o"
    code = main([
        "--config", str(fig5_file), "--out", str(out), "--seed", "9", "--strategy", "fd-af",
        "--metric", "outage", "--snr-start", "5", "--snr-stop", "15", "--snr-step", "10", "--power-model", "per-node",
    ])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    cfg = manifest["config"]
    assert cfg["seed"] == 9
    assert cfg["strategies"] == [{"kind": "fd-af", "search": "all", "power_model": "per-node"}]
    assert manifest["snr_grid_db"] == [5.0, 15.0]
    assert list(manifest["outputs"]) == ["outage_fd-af"]


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"snr_db": {"start": 10, "stop": 0, "step": 1}}, "snr_db"),
        ({"metrics": ["throughput"]}, "metrics"),
        ({"strategies": ["warp"]}, "strategies"),
        ({"trials": 0}, "trials"),
        ({"colour": "red"}, "colour"),
        ({"seed": -1}, "seed"),
        ({"symbols_per_trial": 3}, "symbols_per_trial"),
    ],
)
def test_invalid_configs(patch, field):
    with pytest.raises(ConfigError) as info:
        resolve_config(dict(FIG5, **patch))
    assert info.value.field == field


def test_verify_fast_exit_code(capsys):
    assert main(["--verify", "fast"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") >= 4
