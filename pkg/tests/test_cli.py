"""Command line interface: argument handling, output and error paths."""

import numpy as np

from wbfv.bench import SCENARIOS
from wbfv.cli import main


def _err_value(out):
    for line in out.splitlines():
        if line.startswith("  u: "):
            return float(line.split(":")[1])
    raise AssertionError(f"no error line in output:\n{out}")


def test_list_shows_every_scenario(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    lines = [l for l in out.splitlines() if l.strip()]
    assert len(lines) == len(SCENARIOS)
    for name in SCENARIOS:
        assert name in out
    assert "[burgers1]" in out
    assert "[shallow_water]" in out
    assert "Subcritical" in out


def test_run_with_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "steady.cfg"
    cfg.write_text(
        "# short steady run\n"
        "scenario = burgers1-steady\n"
        "scheme = dwbm\n"
        "order = 3\n"
        "cells = 40\n"
        "t_end = 0.2\n")
    assert main(["run", "--config", str(cfg), "--cells", "12"]) == 0
    out = capsys.readouterr().out
    # the flag overrides the file's 40 cells
    assert "12 cells" in out
    assert "scheme dwbm3" in out
    assert "t_end = 0.20000000000000001" in out
    assert "L1 errors vs the initial stationary averages" in out
    assert _err_value(out) < 1e-6
    # without --out the final snapshot is printed inline
    assert "snapshot at t = 0.2" in out
    assert "x_center u H" in out
    data_rows = [l for l in out.splitlines()
                 if l and l[0] in "-0123456789" and len(l.split()) == 3]
    assert len(data_rows) == 12


def test_run_skip_reference_and_np_flag(capsys):
    argv = ["run", "--scenario", "burgers1-steady", "--scheme", "sm",
            "--order", "1", "--cells", "10", "--t-end", "0.05",
            "--np", "2", "--skip-reference"]
    assert main(argv) == 0
    out = capsys.readouterr().out
    assert "errors: skipped (no reference)" in out
    assert "n_p = 2" in out
    assert "scheme sm1" in out


def test_run_writes_snapshot_files(tmp_path, capsys):
    out_dir = tmp_path / "snaps"
    argv = ["run", "--scenario", "burgers1-steady", "--scheme", "dwbm",
            "--order", "2", "--cells", "12", "--t-end", "0.1",
            "--out", str(out_dir)]
    assert main(argv) == 0
    out = capsys.readouterr().out
    names = ["burgers1-steady-dwbm2-12cells-t0.txt",
             "burgers1-steady-dwbm2-12cells-t0.1.txt"]
    for name in names:
        path = out_dir / name
        assert path.exists()
        assert f"wrote {path}" in out
        table = np.loadtxt(path)
        assert table.shape == (12, 3)
    assert "snapshot at t" not in out


def test_table_prints_errors_and_orders(capsys):
    argv = ["table", "--scenario", "burgers1-steady", "--scheme", "sm",
            "--order", "2", "--cells", "12,24", "--t-end", "0.2"]
    assert main(argv) == 0
    out = capsys.readouterr().out
    assert "scenario burgers1-steady, scheme sm2" in out
    assert "l1_error" in out
    rows = {}
    for line in out.splitlines():
        parts = line.split()
        if len(parts) == 4 and parts[1] == "u":
            rows[int(parts[0])] = (float(parts[2]), parts[3])
    assert set(rows) == {12, 24}
    assert rows[12][1] == "-"
    assert 0.5 < float(rows[24][1]) < 4.0
    assert rows[24][0] < rows[12][0]
    assert out.count("cells: newton max") == 2


def test_table_writes_error_file(tmp_path, capsys):
    out_dir = tmp_path / "tables"
    argv = ["table", "--scenario", "burgers1-steady", "--scheme", "sm",
            "--order", "2", "--cells", "12,24", "--t-end", "0.2",
            "--out", str(out_dir)]
    assert main(argv) == 0
    out = capsys.readouterr().out
    path = out_dir / "burgers1-steady-sm2-errors.txt"
    assert path.exists()
    assert f"wrote {path}" in out
    text = path.read_text()
    assert text.startswith("scenario burgers1-steady, scheme sm2")
    assert "24" in text


def test_error_paths_exit_with_code_one(tmp_path, capsys):
    cases = [
        (["table", "--scenario", "burgers1-steady", "--cells", "12,25"],
         "meshes must double: 12 -> 25"),
        (["table", "--scenario", "burgers1-steady", "--cells", "12,abc"],
         "bad cell list"),
        (["table", "--scenario", "burgers1-steady"],
         "a mesh list is required"),
        (["run", "--scenario", "nope", "--cells", "8"],
         "unknown scenario 'nope'"),
        (["run", "--cells", "8"],
         "a scenario is required (--scenario or config file)"),
        (["run", "--scenario", "burgers2-steady", "--scheme", "wbm",
          "--cells", "8", "--t-end", "0.05"],
         "use dwbm instead"),
    ]
    for argv, message in cases:
        assert main(argv) == 1
        captured = capsys.readouterr()
        assert message in captured.err
        assert captured.err.startswith("wbfv: ")

    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = red\n")
    assert main(["run", "--config", str(bad)]) == 1
    assert "unknown key 'colour'" in capsys.readouterr().err
