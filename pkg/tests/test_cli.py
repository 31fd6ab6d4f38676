import csv
import hashlib
import json
import os

import pytest

from conftest import run_cli
from magenergy.cli import ConfigError, resolve_config

FAST = {
    "field-map": ["--resolution", "8"],
    "dmag-curve": ["--n-points", "5"],
    "cyl-compare": ["--resolution", "2", "--delta-min", "5"],
    "dead-layer": ["--n-points", "5"],
    "detectability": ["--n-points", "5"],
    "protocol-sim": ["--n-tau", "60", "--shots", "500"],
    "oracle-verify": ["--points", "6", "--samples", "20000", "--tolerance", "1e-3"],
}


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_help_and_version():
    cp = run_cli("--help")
    assert cp.returncode == 0
    assert "protocol-sim" in cp.stdout
    cp = run_cli("--version")
    assert cp.returncode == 0 and cp.stdout.strip()


@pytest.mark.parametrize("command", sorted(FAST))
def test_command_writes_output_and_manifest(tmp_path, command):
    out = tmp_path / "out.csv"
    cp = run_cli(command, "--output", out, *FAST[command])
    assert cp.returncode == 0, cp.stderr
    text = out.read_text()
    assert len(text.splitlines()) >= 2
    manifest = json.loads((tmp_path / "out.csv.manifest.json").read_text())
    assert manifest["command"] == command
    assert manifest["outputs"][0]["sha256"] == hashlib.sha256(text.encode()).hexdigest()
    assert "version" in manifest and "config" in manifest


def test_csv_headers(tmp_path):
    expected = {
        "field-map": "x_m,y_m,z_m,Bx_T,By_T,Bz_T,region",
        "cyl-compare": "delta,lambda,D_cyl_Hz,D_sph_Hz,rel_diff,l2_fraction",
        "dead-layer": "d_m,D_min_Hz,delta_t_m",
        "protocol-sim": "tau_s,p0,shots,counts",
    }
    for command, header in expected.items():
        out = tmp_path / f"{command}.csv"
        assert run_cli(command, "--output", out, *FAST[command]).returncode == 0
        assert out.read_text().splitlines()[0] == header


def test_json_format(tmp_path):
    out = tmp_path / "d.json"
    assert run_cli("dead-layer", "--output", out, "--format", "json", "--n-points", "3").returncode == 0
    rows = json.loads(out.read_text())
    assert len(rows) == 3 and set(rows[0]) == {"d_m", "D_min_Hz", "delta_t_m"}


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "dead-layer", "n_points": 4, "d_min_hz": 100.0}))
    out = tmp_path / "o.csv"
    assert run_cli("dead-layer", "--config", cfg, "--output", out, "--n-points", "6").returncode == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 6
    assert float(rows[0]["D_min_Hz"]) == 100.0


def test_detectability_manifest_crossings(tmp_path):
    out = tmp_path / "o.csv"
    assert run_cli("detectability", "--output", out, "--n-points", "3").returncode == 0
    m = json.loads((tmp_path / "o.csv.manifest.json").read_text())
    assert 15e-9 <= m["results"]["crossing_distance_m"]["superconductor"] <= 40e-9


@pytest.mark.parametrize("content", ["{not json", "[1, 2]", '{"command": "dead-layer", "bogus": 1}',
                                     '{"command": "field-map"}', '{"n_points": "many"}'])
def test_bad_config_exit_2_without_output(tmp_path, content):
    cfg = tmp_path / "c.json"
    cfg.write_text(content)
    out = tmp_path / "o.csv"
    cp = run_cli("dead-layer", "--config", cfg, "--output", out)
    assert cp.returncode == 2
    assert "config error" in cp.stderr
    assert os.listdir(tmp_path) == ["c.json"]


def test_missing_output_is_config_error():
    assert run_cli("dead-layer").returncode == 2


def test_unknown_flag_is_config_error(tmp_path):
    assert run_cli("dead-layer", "--output", tmp_path / "o.csv", "--bogus", "1").returncode == 2


def test_invalid_physics_input_exit_2(tmp_path):
    cp = run_cli("field-map", "--output", tmp_path / "o.csv", "--d-m", "1e-10")
    assert cp.returncode == 2
    assert not (tmp_path / "o.csv").exists()


def test_unconverged_exit_3(tmp_path):
    cp = run_cli("cyl-compare", "--output", tmp_path / "o.csv", "--resolution", "2", "--lambda-min", "0.3",
                 "--lambda-max", "0.3", "--delta-min", "2", "--delta-max", "2", "--l-max", "4")
    assert cp.returncode == 3
    assert not (tmp_path / "o.csv").exists()
    cp = run_cli("cyl-compare", "--output", tmp_path / "o.csv", "--resolution", "1", "--lambda-min", "0.3",
                 "--lambda-max", "0.3", "--delta-min", "2", "--delta-max", "2", "--l-max", "4",
                 "--allow-unconverged", "true")
    assert cp.returncode == 0
    m = json.loads((tmp_path / "o.csv.manifest.json").read_text())
    assert m["results"]["unconverged_cells"]


def test_io_error_exit_4(tmp_path):
    cp = run_cli("dead-layer", "--output", tmp_path / "missing" / "o.csv", "--n-points", "3")
    assert cp.returncode == 4


def test_bad_thread_env(tmp_path):
    env = dict(os.environ, MAGENERGY_THREADS="zero")
    cp = run_cli("cyl-compare", "--output", tmp_path / "o.csv", *FAST["cyl-compare"], env=env)
    assert cp.returncode == 2


def test_thread_count_does_not_change_output(tmp_path):
    outs = []
    for n in ("1", "3"):
        out = tmp_path / f"o{n}.csv"
        env = dict(os.environ, MAGENERGY_THREADS=n)
        assert run_cli("cyl-compare", "--output", out, *FAST["cyl-compare"], env=env).returncode == 0
        outs.append(_read(out))
    assert outs[0] == outs[1]


def test_seed_changes_protocol_output(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_cli("protocol-sim", "--output", a, *FAST["protocol-sim"], "--seed", "1").returncode == 0
    assert run_cli("protocol-sim", "--output", b, *FAST["protocol-sim"], "--seed", "2").returncode == 0
    assert _read(a) != _read(b)


def test_resolve_config_rules():
    with pytest.raises(ConfigError):
        resolve_config("dead-layer", {"command": "field-map"}, {"output": "x"})
    with pytest.raises(ConfigError):
        resolve_config("dead-layer", {"n_points": 2.5}, {"output": "x"})
    cfg = resolve_config("dead-layer", {"n_points": 7}, {"output": "x", "n_points": None})
    assert cfg["n_points"] == 7
