import csv
import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from tvburgers import cli
from tvburgers.errors import ParseError, TypeMismatch, UnknownKey


def test_empty_config_is_default():
    assert cli.parse_config_text("") == cli.Config()
    assert cli.parse_config_text("# only a comment\n\n") == cli.Config()


def test_typed_values():
    c = cli.parse_config_text("[burgers2d]\nk = 2\nds = 1e-3\nshoot = no\n")
    assert c["burgers2d"]["k"] == 2 and isinstance(c["burgers2d"]["k"], int)
    assert c["burgers2d"]["ds"] == 0.001
    assert c["burgers2d"]["shoot"] is False


def test_type_mismatch_line():
    with pytest.raises(TypeMismatch) as e:
        cli.parse_config_text("[burgers2d]\n# comment\nk = two\n")
    assert e.value.line == 3


def test_unknown_key_and_section():
    with pytest.raises(UnknownKey):
        cli.parse_config_text("[burgers2d]\nkk = 2\n")
    with pytest.raises(UnknownKey):
        cli.parse_config_text("[nope]\n")


@pytest.mark.parametrize("text,line", [("[profile\n", 1), ("[profile]\nfamily psi\n", 2), ("k = 2\n", 1)])
def test_parse_errors(text, line):
    with pytest.raises(ParseError) as e:
        cli.parse_config_text(text)
    assert e.value.line == line


def test_round_trip():
    c = cli.parse_config_text("[profile]\nfamily = hermite\nx_min = -0.1\n[dss]\namplitude = 0.3333333333333333\n")
    assert cli.parse_config_text(cli.emit_config(c)) == c
    assert cli.parse_config_text(cli.emit_config(cli.Config())) == cli.Config()


def _read_csv(path):
    lines = [l for l in path.read_text().split("\n") if l and not l.startswith("#")]
    return list(csv.reader(lines))


def test_profile_table(tmp_path):
    code = cli.main(["--out-dir", str(tmp_path), "--quiet", "profile", "table", "--family", "psi", "--i", "1"])
    assert code == 0
    rows = _read_csv(tmp_path / "profile_psi.csv")
    assert rows[0] == ["X", "Psi", "dPsi"]
    assert len(rows) == 202
    x, p = float(rows[1][0]), float(rows[1][1])
    assert x == -10.0 and p == pytest.approx(2.0, rel=1e-14)  # Psi_1(-10) = 2: -2 - 8 = -10
    assert (tmp_path / "profile_psi.gp").exists()
    raw = (tmp_path / "profile_psi.csv").read_bytes()
    assert b"\r" not in raw


def test_floats_have_17_digits():
    text = cli.csv_text(("a",), [(0.1,)])
    assert text.splitlines()[-1] == "0.10000000000000001"


def test_manifest(tmp_path):
    argv = ["--out-dir", str(tmp_path), "--quiet", "dss", "build", "--steps", "5"]
    assert cli.main(argv) == 0
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["exit_code"] == 0 and m["error"] is None
    assert m["command_line"] == argv
    assert m["config"]["dss"]["steps"] == 5
    for entry in m["outputs"]:
        data = (tmp_path / entry["file"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == entry["sha256"]
    # the manifest alone is enough to rerun
    cfg = cli.parse_config_text(m["config_text"])
    assert cfg == cli.parse_config_text(cli.emit_config(cfg))
    assert cfg["dss"]["steps"] == 5


def test_deterministic_outputs(tmp_path):
    for sub in ("a", "b"):
        assert cli.main(["--out-dir", str(tmp_path / sub), "--quiet", "shock1d", "run", "--m_max", "6"]) == 0
    for name in ("shock1d_report.csv", "shock1d_convergence.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[profile]\nfamily = hermite\nell = 2\nn = 11\n")
    assert cli.main(["--config", str(cfg), "--out-dir", str(tmp_path / "o"), "--quiet", "profile",
                     "--n", "5"]) == 0
    rows = _read_csv(tmp_path / "o" / "profile_hermite.csv")
    assert rows[0] == ["Y", "h", "dh"] and len(rows) == 6


def test_stability_guard_exit_1(tmp_path):
    code = cli.main(["--out-dir", str(tmp_path), "--quiet", "burgers2d", "run", "--ds", "0.1"])
    assert code == 1
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert "StabilityViolated" in m["error"]
    assert "StabilityViolated" in (tmp_path / "burgers2d_error.txt").read_text()


@pytest.mark.parametrize("argv", [
    ["profile", "--nope", "1"],
    ["profile", "--n", "many"],
    ["nosuch"],
    ["profile", "plot"],
    ["profile", "--family", "nosuch"],
])
def test_usage_errors_exit_2(tmp_path, argv, capsys):
    assert cli.main(["--out-dir", str(tmp_path), "--quiet"] + argv) == 2


def test_sweep(tmp_path):
    code = cli.main(["--out-dir", str(tmp_path), "--quiet", "--sweep", "ell=0,1,2", "profile", "--family", "hermite"])
    assert code == 0
    dirs = sorted(p.name for p in tmp_path.iterdir())
    assert dirs == ["ell=0", "ell=1", "ell=2"]
    for d in dirs:
        assert (tmp_path / d / "manifest.json").exists()
    rows = _read_csv(tmp_path / "ell=2" / "profile_hermite.csv")
    x, h = float(rows[1][0]), float(rows[1][1])
    assert x == -10.0 and h != float(_read_csv(tmp_path / "ell=0" / "profile_hermite.csv")[1][1])


def test_dump_round_trip(tmp_path):
    out = cli.Outputs(tmp_path)
    a = np.arange(12.0).reshape(3, 4) / 7.0
    p = cli.write_dump(out, "f.bin", a, "s=1")
    raw = p.read_bytes()
    assert raw[:4] == b"TVB2" and len(raw) == 64 + 8 * 12
    b, meta = cli.read_dump(p)
    assert np.array_equal(a, b) and meta == ["s=1"]


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "tvburgers", "--out-dir", str(tmp_path), "--quiet", "spectral",
                        "bounds", "--bounds_n", "500"], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "spectral_bounds.csv").exists()
