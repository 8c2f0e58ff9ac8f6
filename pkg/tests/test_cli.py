import json
import subprocess
import sys

import pytest

from pseudoparabolic import cli

SMALL = """
[problem]
grid = [12, 12]

[constants]
probes = 10

[stepper]
t_end = 2.0

[output]
plots = false
"""


def _write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_indices_grushin(capsys):
    assert cli.main(["indices", "--field", "grushin", "--domain", "-1,1,-1,1"]) == cli.EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["Z"] == 2 and out["r"] == 3


def test_non_hormander_field_exits_2(tmp_path):
    spec = _write(tmp_path, 'dim = 2\n[[field]]\nterms = [[1, [0, 0], "1"]]\n[[field]]\nterms = [[1, [0, 1], "1"]]\n',
                  "flat.toml")
    assert cli.main(["indices", "--field", spec]) == cli.EXIT_HORMANDER


def test_malformed_field_spec_exits_3(tmp_path):
    spec = _write(tmp_path, 'dim = 2\n[[field]]\nterms = [[1, [1, 0], "1"]]\n', "div.toml")
    assert cli.main(["indices", "--field", spec]) == cli.EXIT_CONFIG


def test_bad_config_exits_3(tmp_path):
    cfg = _write(tmp_path, "[problem]\nbogus = 1\n")
    assert cli.main(["constants", "--config", cfg]) == cli.EXIT_CONFIG
    assert cli.main(["constants", "--config", str(tmp_path / "missing.toml")]) == cli.EXIT_CONFIG


def test_exponent_out_of_range_exits_3(tmp_path):
    cfg = _write(tmp_path, SMALL.replace("grid = [12, 12]", "grid = [12, 12]\np = 9.0"))
    assert cli.main(["constants", "--config", cfg]) == cli.EXIT_CONFIG


def test_classify_zero_data_is_critical(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL + "\n[initial]\nexplicit_scale = 0.0\n")
    assert cli.main(["classify", "--config", cfg]) == cli.EXIT_OK
    assert json.loads(capsys.readouterr().out)["regime"] == "Critical/Unknown"


def test_short_horizon_fails_stationary_check(tmp_path):
    # t_end = 2 is too short for the distance to the stationary set to shrink 100-fold
    cfg = _write(tmp_path, SMALL)
    assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "r")]) == cli.EXIT_CHECKS


def test_simulate_then_verify(tmp_path, capsys):
    cfg = _write(tmp_path, SMALL.replace("t_end = 2.0", "t_end = 14.0"))
    out = tmp_path / "run"
    assert cli.main(["simulate", "--config", cfg, "--out", str(out)]) == cli.EXIT_OK
    for name in ("trace.csv", "snapshots.json", "run.json", "constants.json", "report.json"):
        assert (out / name).exists(), name
    capsys.readouterr()
    assert cli.main(["verify", "--run-dir", str(out)]) == cli.EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert rep["regime"] == "StableWell"


def test_sweep_writes_summary(tmp_path):
    text = SMALL + '\n[[sweep.axis]]\npath = "initial.target_j0_over_d"\nvalues = [0.2, 0.4]\n'
    cfg = _write(tmp_path, text)
    out = tmp_path / "sweep"
    assert cli.main(["sweep", "--config", cfg, "--out", str(out), "--format", "csv"]) == cli.EXIT_OK
    summary = next(out.glob("summary.*")).read_text().splitlines()
    assert len(summary) == 3


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "pseudoparabolic.cli", "indices", "--field", "heisenberg"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert json.loads(res.stdout)["Z"] == 2


@pytest.mark.parametrize("argv", [["indices", "--field", "laplacian", "--dim", "3", "--domain",
                                   "-1,1,-1,1,-1,1"]])
def test_laplacian_indices(argv, capsys):
    assert cli.main(argv) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["Z"] == 1


def test_verify_with_mismatched_grid_exits_3(tmp_path):
    cfg = _write(tmp_path, SMALL.replace("t_end = 2.0", "t_end = 14.0"))
    out = tmp_path / "run"
    cli.main(["simulate", "--config", cfg, "--out", str(out)])
    other = _write(tmp_path, SMALL.replace("grid = [12, 12]", "grid = [10, 10]"), "other.toml")
    assert cli.main(["verify", "--run-dir", str(out), "--config", other]) == cli.EXIT_CONFIG
