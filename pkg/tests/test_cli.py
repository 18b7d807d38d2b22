import csv

import pytest

from sla_inverse.cli import EXIT_ANALYSIS, EXIT_CONFIG, EXIT_OK, main
from sla_inverse.ident import STIFFNESS_LIMIT_MESSAGE

CONFIG = """\
[geometry]
kind = beam
span = 600
depth = 150
thickness = 100
elem_size = 10
load = 1e5

[material]
E = 30000
nu = 0.2

[law]
shape = exponential
f_t = 3
g_f = 0.08
band = 1%

[forward]
decimate = 300

[ident]
delta_sigma = 1%
"""


@pytest.fixture
def config(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text(CONFIG)
    return p


def run(config, out, *args):
    return main([args[0], "-c", str(config), "-o", str(out), *args[1:]])


def test_mesh_reports_counts(config, tmp_path, capsys):
    assert run(config, tmp_path / "m", "mesh") == EXIT_OK
    text = capsys.readouterr().out
    assert "interface" in text.lower() and "wrote" in text


def test_mesh_output_is_byte_identical(config, tmp_path):
    run(config, tmp_path / "a", "mesh")
    run(config, tmp_path / "b", "mesh")
    (fa,) = sorted((tmp_path / "a").iterdir())
    (fb,) = sorted((tmp_path / "b").iterdir())
    assert fa.read_bytes() == fb.read_bytes()


def test_invalid_notch_is_config_error(config, tmp_path, capsys):
    code = run(config, tmp_path / "m", "mesh", "--set", "geometry.notch_depth=200")
    assert code == EXIT_CONFIG
    assert capsys.readouterr().err.startswith("error:")


def test_missing_config_file(tmp_path, capsys):
    assert main(["mesh", "-c", str(tmp_path / "nope.ini")]) == EXIT_CONFIG
    assert "not found" in capsys.readouterr().err


def test_forward_writes_decimated_curve(config, tmp_path):
    assert run(config, tmp_path / "f", "forward") == EXIT_OK
    files = {p.name for p in (tmp_path / "f").iterdir()}
    assert "forward_curve.csv" in files and "forward_events.csv" in files
    assert len((tmp_path / "f" / "experiment.csv").read_text().splitlines()) == 301


def test_inverse_summary_and_files(config, tmp_path, capsys):
    assert run(config, tmp_path / "i", "inverse") == EXIT_OK
    out = capsys.readouterr().out
    assert "pass=1" in out and "reason=ts_complete" in out
    names = {p.name for p in (tmp_path / "i").iterdir()}
    assert {"ts_pass1.csv", "trace.csv", "summary.csv", "curve.svg", "ts.svg"} <= names


def test_inverse_multipass(config, tmp_path, capsys):
    code = run(config, tmp_path / "i", "inverse", "--set", "ident.multipass=yes", "--set", "ident.max_passes=2")
    assert code == EXIT_OK
    ts_files = sorted(p.name for p in (tmp_path / "i").glob("ts_pass*.csv"))
    assert len(ts_files) >= 2
    assert "pass=2" in capsys.readouterr().out


def test_inverse_deterministic(config, tmp_path):
    run(config, tmp_path / "a", "inverse", "--seed", "4")
    run(config, tmp_path / "b", "inverse", "--seed", "4")
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()


def test_inverse_too_stiff_exits_with_message(config, tmp_path, capsys):
    curve = tmp_path / "exp.csv"
    assert run(config, tmp_path / "f", "forward") == EXIT_OK
    src = tmp_path / "f" / "forward_curve.csv"
    curve.write_bytes(src.read_bytes())
    code = run(config, tmp_path / "i", "inverse", "--set", f"curve.path={curve}", "--set", "material.E=60000")
    assert code == EXIT_ANALYSIS
    assert STIFFNESS_LIMIT_MESSAGE in capsys.readouterr().err


def test_bad_override_and_value(config, tmp_path, capsys):
    assert run(config, tmp_path / "i", "inverse", "--set", "nodot=1") == EXIT_CONFIG
    assert run(config, tmp_path / "i", "inverse", "--set", "ident.delta_sigma=abc") == EXIT_CONFIG


def test_sweep_table(config, tmp_path, capsys):
    code = run(config, tmp_path / "s", "sweep", "--set", "sweep.E=30000,25000")
    assert code == EXIT_OK
    with open(tmp_path / "s" / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["E"]) for r in rows] == [30000.0, 25000.0]
    g = [float(r["G_F"]) for r in rows]
    assert all(v > 0 for v in g)


def test_sweep_needs_axis(config, tmp_path):
    assert run(config, tmp_path / "s", "sweep") == EXIT_CONFIG
