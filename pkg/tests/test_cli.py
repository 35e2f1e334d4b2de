import csv
import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from foxkernel import validation
from foxkernel.cli import BOX_COLUMNS, EVOLVE_COLUMNS, KERNEL_COLUMNS, main, parse_grid


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_kernel_csv_layout(capsys):
    code, out, _ = run(capsys, "kernel", "--alpha", "1.5", "--grid", "-2:2:5", "--times", "0.5,1")
    assert code == 0
    header, rows = read_csv(out)
    assert header == KERNEL_COLUMNS
    assert len(rows) == 10
    assert [float(r[0]) for r in rows[:5]] == [-2.0, -1.0, 0.0, 1.0, 2.0]
    # imaginary time by default: real, positive values
    assert all(float(r[3]) == 0.0 and float(r[2]) > 0 for r in rows)
    assert all(r[6] == "1" for r in rows)


def test_sweep_alpha2_block_matches_gaussian(capsys):
    code, out, _ = run(capsys, "sweep", "--grid", "-3:3:13", "--real-time")
    assert code == 0
    header, rows = read_csv(out)
    assert header == ["alpha"] + KERNEL_COLUMNS
    alphas = [float(r[0]) for r in rows]
    assert sorted(set(alphas)) == [1.2, 1.5, 1.8, 2.0]
    block = [r for r in rows if float(r[0]) == 2.0]
    code, out, _ = run(capsys, "kernel", "--kind", "feynman", "--alpha", "2", "--grid", "-3:3:13", "--real-time")
    assert code == 0
    _, ref = read_csv(out)
    got = np.array([complex(float(r[3]), float(r[4])) for r in block])
    want = np.array([complex(float(r[2]), float(r[3])) for r in ref])
    assert np.max(np.abs(got - want)) <= 1e-8


def test_json_output(capsys):
    code, out, _ = run(capsys, "kernel", "--grid", "0:1:3", "--format", "json")
    assert code == 0
    data = json.loads(out)
    assert data["columns"] == KERNEL_COLUMNS
    assert len(data["rows"]) == 3 and data["rows"][0][6] is True


@pytest.mark.parametrize("grid", ["0:1:1", "1:0:5", "0:1", "a:b:c", "0:inf:4"])
def test_bad_grid_is_config_error(capsys, grid):
    code, _, err = run(capsys, "kernel", "--grid", grid)
    assert code == 1
    assert "grid" in err


def test_parse_grid_endpoints():
    np.testing.assert_array_equal(parse_grid("-1:1:3"), [-1.0, 0.0, 1.0])


@pytest.mark.parametrize(
    "text, key",
    [
        ("alpha = 2.5\n", "alpha"),
        ("d_alpha = -1.0\n", "d_alpha"),
        ("hbar = 0\n", "hbar"),
        ('time_mode = "sideways"\n', "time_mode"),
        ("[box]\na = 0.0\n", "box.a"),
    ],
)
def test_invalid_config_names_key(capsys, tmp_path, text, key):
    cfg = write(tmp_path, "run.toml", text)
    code, _, err = run(capsys, "box" if "box" in text else "kernel", "--config", cfg)
    assert code == 1
    assert f"[{key}]" in err


def test_unknown_config_key(capsys, tmp_path):
    cfg = write(tmp_path, "run.json", json.dumps({"alpha": 1.5, "mass": 2.0}))
    code, _, err = run(capsys, "kernel", "--config", cfg)
    assert code == 1 and "mass" in err


def test_config_file_and_override(capsys, tmp_path):
    cfg = write(tmp_path, "run.toml", 'alpha = 1.5\nhbar = 0.5\ntime_mode = "real"\n')
    _, out, _ = run(capsys, "kernel", "--config", cfg, "--grid", "1:2:2")
    _, rows = read_csv(out)
    assert float(rows[0][3]) != 0.0
    _, out, _ = run(capsys, "kernel", "--config", cfg, "--grid", "1:2:2", "--wick")
    _, rows = read_csv(out)
    assert float(rows[0][3]) == 0.0


def test_box_walls(capsys, tmp_path):
    cfg = write(tmp_path, "box.toml", "alpha = 1.5\n[box]\na = 2.0\nn_modes = 300\n")
    code, out, _ = run(capsys, "box", "--config", cfg, "--times", "0.3", "--x-a", "0.4")
    assert code == 0
    header, rows = read_csv(out)
    assert header == BOX_COLUMNS
    walls = [r for r in rows if abs(float(r[0])) == 2.0]
    assert len(walls) == 2
    assert all(abs(complex(float(r[3]), float(r[4]))) <= 1e-8 for r in walls)


def test_box_images_method(capsys):
    code, out, _ = run(capsys, "box", "--method", "images", "--alpha", "2", "--times", "0.2")
    assert code == 0
    _, rows = read_csv(out)
    assert {r[-1] for r in rows} == {"images"}


def test_evolve_preserves_eigenstate_modulus(capsys):
    code, out, _ = run(capsys, "evolve", "--alpha", "1.5", "--real-time", "--state", "box:1", "--times", "0.7")
    assert code == 0
    header, rows = read_csv(out)
    assert header == EVOLVE_COLUMNS
    x = np.array([float(r[0]) for r in rows])
    modulus = np.array([float(r[4]) for r in rows])
    assert np.max(np.abs(modulus - np.abs(np.sin(np.pi * x)))) <= 1e-4


def test_evolve_coarse_grid_warns(capsys):
    with pytest.warns(Warning, match="alias"):
        code, _, _ = run(capsys, "evolve", "--grid", "-1:1:11", "--times", "0.1")
    assert code == 0


def test_output_is_reproducible(capsys, tmp_path):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (first, second):
        assert main(["sweep", "--grid", "-3:3:7", "--real-time", "--out", str(path)]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert capsys.readouterr().out == ""


def test_atomic_write_leaves_no_partial_file(capsys, tmp_path):
    target = tmp_path / "out.csv"
    assert main(["kernel", "--grid", "0:1:3", "--out", str(target)]) == 0
    assert target.read_text().startswith("x,t,")
    assert sorted(os.listdir(tmp_path)) == ["out.csv"]
    before = target.read_bytes()
    code, _, _ = run(capsys, "kernel", "--grid", "0:1:1", "--out", str(target))
    assert code == 1
    assert target.read_bytes() == before
    assert sorted(os.listdir(tmp_path)) == ["out.csv"]


def test_missing_output_directory(capsys, tmp_path):
    code, _, err = run(capsys, "kernel", "--out", str(tmp_path / "nope" / "out.csv"))
    assert code == 1 and "does not exist" in err


def test_unconverged_rows_exit_partial(capsys):
    code, out, _ = run(capsys, "kernel", "--alpha", "1.05", "--real-time", "--grid", "0:30:4")
    assert code == 2
    _, rows = read_csv(out)
    assert rows[0][6] == "1" and rows[-1][6] == "0"


def test_validate_subset(capsys, tmp_path):
    report = tmp_path / "report.json"
    code, _, err = run(capsys, "validate", "--checks", "alpha2-1d,scaling", "--out", str(report))
    assert code == 0
    data = json.loads(report.read_text())
    assert data["passed"] is True
    assert [c["name"] for c in data["checks"]] == ["alpha2-1d", "scaling"]
    assert err.count("PASS") == 2


def test_validate_is_byte_identical(capsys):
    _, first, _ = run(capsys, "validate", "--checks", "alpha2-1d,exp-series", "--seed", "4")
    _, second, _ = run(capsys, "validate", "--checks", "alpha2-1d,exp-series", "--seed", "4")
    assert first == second


def test_validate_failure_exit(capsys, monkeypatch):
    def broken(**kw):
        return validation.CheckResult("scaling", "always fails", False, 1.0, 1e-9)

    monkeypatch.setitem(validation.CHECKS, "scaling", broken)
    code, out, err = run(capsys, "validate", "--checks", "alpha2-1d,scaling")
    assert code == 3
    assert "failed checks: scaling" in err
    report = json.loads(out)
    assert report["passed"] is False
    assert [c["passed"] for c in report["checks"]] == [True, False]


def test_validate_unknown_check(capsys):
    code, _, err = run(capsys, "validate", "--checks", "nonsense")
    assert code == 1 and "nonsense" in err


def test_console_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "foxkernel.cli", "kernel", "--grid", "0:1:2"], capture_output=True, text=True
    )
    assert res.returncode == 0
    assert res.stdout.splitlines()[0] == ",".join(KERNEL_COLUMNS)
