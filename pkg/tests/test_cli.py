import json
from pathlib import Path

import numpy as np
import pytest

from floquet_bands.cli import load_config, main, parse_angle
from floquet_bands.errors import ConfigError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

TRIMER = """
[layout]
kind = "square3"

[modulation]
family = "cosine"
omega = {omega}
epsilon = {eps}
phases = {phases}

[path]
kind = "{path}"
samples = {samples}
"""


def write(tmp_path, name, text):
    p = tmp_path / f"{name}.toml"
    p.write_text(text)
    return str(p)


def trimer(tmp_path, name="run", omega=0.2, eps=0.0, phases='[0, "pi/2", "pi"]', path="square", samples=4, extra=""):
    return write(tmp_path, name, TRIMER.format(omega=omega, eps=eps, phases=phases, path=path, samples=samples) + extra)


@pytest.mark.parametrize("s, v", [("pi", np.pi), ("-pi/2", -np.pi / 2), ("2pi/3", 2 * np.pi / 3), ("0.5*pi", np.pi / 2), (1, 1.0), ("0.25", 0.25)])
def test_parse_angle(s, v):
    assert parse_angle(s) == pytest.approx(v)


def test_parse_angle_rejects_garbage():
    with pytest.raises(ConfigError):
        parse_angle("tau")


def test_unknown_keys_rejected(tmp_path, capsys):
    cfg = trimer(tmp_path, extra="\n[integrator]\nrtol = 1e-10\nmethod = 'rk4'\n")
    with pytest.raises(ConfigError, match="method"):
        load_config(cfg)
    assert main(["bands", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_unknown_table_rejected(tmp_path):
    cfg = trimer(tmp_path, extra="\n[plot]\ncolor = 'red'\n")
    assert main(["bands", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_invalid_value_nonzero_exit(tmp_path, capsys):
    cfg = trimer(tmp_path, eps=1.5)
    assert main(["bands", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "epsilon" in capsys.readouterr().err


def test_capacitance_command(tmp_path, capsys):
    cfg = trimer(tmp_path)
    out = tmp_path / "o"
    assert main(["capacitance", "--config", cfg, "--out", str(out)]) == 0
    f = out / "run_capacitance.txt"
    assert f.read_text().splitlines()[0] == "N 3 D 2"
    diag = (out / "run_capacitance_diag.csv").read_text().splitlines()
    assert diag[1].split(",")[3] == "1"  # the path starts at Gamma
    first = f.read_bytes()
    assert main(["capacitance", "--config", cfg, "--out", str(out)]) == 0
    assert f.read_bytes() == first
    assert "conjugation residual" in capsys.readouterr().out


def test_bands_static_reciprocal(tmp_path):
    cfg = trimer(tmp_path)
    assert main(["bands", "--config", cfg, "--out", str(tmp_path), "--report", "reciprocity,gaps"]) == 0
    rep = json.loads((tmp_path / "run_reciprocity.json").read_text())
    assert rep["maxSetDistance"] <= 1e-8
    gaps = json.loads((tmp_path / "run_gaps.json").read_text())
    assert gaps["unidirectional"] == []
    assert set(gaps) == {"gapsForward", "gapsBackward", "unidirectional", "resolution", "subResolution"}


def test_bands_square_eps025_counts(tmp_path):
    cfg = trimer(tmp_path, samples=3)
    assert main(["bands", "--config", cfg, "--out", str(tmp_path), "--epsilon", "0.25"]) == 0
    lines = (tmp_path / "run_bands.csv").read_text().splitlines()
    assert lines[0].startswith("# omega=0.2 epsilon=0.25 layout=square3")
    rows = [ln.split(",") for ln in lines[2:]]
    per_sample = {}
    for r in rows:
        per_sample.setdefault(r[0], set()).add(int(r[3]))
    assert all(v == set(range(6)) for v in per_sample.values())
    assert len(per_sample) == 13


def test_honeycomb_eps05_gap_report(tmp_path):
    out = tmp_path / "hc"
    assert main(["bands", "--config", str(CONFIGS / "fig7_honeycomb.toml"), "--out", str(out), "--epsilon", "0.5"]) == 0
    g = json.loads((out / "fig7_honeycomb_gaps.json").read_text())
    assert g["gapsForward"] and g["gapsBackward"]


def test_perturb_rows(tmp_path):
    cfg = trimer(tmp_path, path="chain", samples=157, extra="\n[perturb]\nomegas = [0.2, 0.3]\n")
    assert main(["perturb", "--config", cfg, "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "run_perturb.json").read_text())
    rows = doc["rows"]
    assert rows
    for key in ("Omega", "alphaDeg", "r_alpha", "r_minus_alpha", "crossMethodResidual"):
        assert key in rows[0]
    active = [r for r in rows if r["active"]]
    margin = [abs(r["abs_r_alpha"] - r["abs_r_minus_alpha"]) / max(r["abs_r_alpha"], r["abs_r_minus_alpha"]) for r in active]
    assert max(margin) >= 0.1


def test_perturb_equal_phases(tmp_path):
    cfg = trimer(tmp_path, phases="[0.7, 0.7, 0.7]", path="chain", samples=101)
    assert main(["perturb", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = json.loads((tmp_path / "run_perturb.json").read_text())["rows"]
    assert rows
    for r in rows:
        assert r["abs_r_alpha"] <= 1e-10 and r["abs_r_minus_alpha"] <= 1e-10


def test_perturb_without_points_is_not_an_error(tmp_path, capsys):
    cfg = trimer(tmp_path, omega=5.0, path="chain", samples=11)
    assert main(["perturb", "--config", cfg, "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "run_perturb.json").read_text())
    assert doc["rows"] == [] and "note" in doc


def test_sweep_output(tmp_path):
    extra = "\n[sweep]\nalpha = [-1.63145393, 0.0]\nepsilons = [0.0, 0.01, 0.02, 0.04]\n"
    cfg = trimer(tmp_path, extra=extra)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "run_sweep.csv").read_text().splitlines()
    assert lines[1] == "epsilon,splitting,shift,fit_exponent_running"
    assert lines[2].split(",")[:3] == ["0.0", "0.0", "0.0"]
    assert lines[-2].startswith("# splitting_exponent=")
    assert lines[-1].startswith("# shift_exponent=")
    assert float(lines[-2].split("=")[1]) == pytest.approx(1.0, abs=0.1)


def test_sweep_censored_rows_marked(tmp_path):
    # equal phases: the degenerate pair never splits, so every eps > 0 row is censored
    extra = "\n[sweep]\nalpha = [-1.63145393, 0.0]\nepsilons = [0.0, 0.01, 0.02]\n"
    cfg = trimer(tmp_path, phases="[0, 0, 0]", extra=extra)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "run_sweep.csv").read_text().splitlines()[3:5]
    assert all(r.split(",")[1] == "NA" for r in rows)
