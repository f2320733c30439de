import csv
import json
import math

import numpy as np
import pytest

from squidjpa.analysis import reflection_model
from squidjpa.cli import main
from squidjpa.config import parse_config
from squidjpa.outputs import write_csv

A = ["--set", "circuit.l_shunt=15", "--set", "circuit.f0_target=6", "--set", "circuit.q_target=8.1"]


def read(path):
    return list(csv.reader(open(path)))


def test_dc_outputs_and_manifest(tmp_path):
    out = tmp_path / "dc"
    code = main(["dc", *A, "--set", "task.phi_e_grid=[0.5, 1.0, 1.5]", "--out", str(out)])
    assert code == 0
    rows = read(out / "dc.csv")
    assert rows[0][:4] == ["phi_e_rad", "phi_e_flux_quanta", "phi_dc_rad", "f0_hz"]
    assert len(rows) == 4
    manifest = json.load(open(out / "manifest.json"))
    assert set(manifest["outputs"]) == {"dc.csv", "summary.json", "manifest.json"}
    assert parse_config(manifest["config"]) == parse_config(manifest["config"])
    summary = json.load(open(out / "summary.json"))
    assert math.isclose(summary["operating_point"]["f0_hz"], 6e9, rel_tol=1e-9)


def test_manifest_config_round_trip(tmp_path):
    out = tmp_path / "o"
    main(["pce", *A, "--set", "circuit.c_coupling=0.26", "--out", str(out)])
    doc = json.load(open(out / "manifest.json"))["config"]
    cfg = parse_config(doc)
    assert parse_config(cfg.to_document()) == cfg
    assert cfg.output.directory == str(out)


def test_rerun_byte_identical(tmp_path):
    args = ["pce", *A, "--set", "circuit.c_coupling=0.26", "--set", "task.points=50"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b"), "--threads", "2"]) == 0
    assert (tmp_path / "a/pce.csv").read_bytes() == (tmp_path / "b/pce.csv").read_bytes()
    assert (tmp_path / "a/summary.json").read_bytes() == (tmp_path / "b/summary.json").read_bytes()


def test_config_error_exit(tmp_path, capsys):
    code = main(["dc", "--set", "circuit.l_shunt=-3", "--set", "circuit.f0_target=6",
                 "--set", "circuit.q_target=8", "--out", str(tmp_path)])
    assert code == 2
    assert "/circuit/l_shunt" in capsys.readouterr().err


def test_config_file_and_task_mismatch(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"task": "dc", "circuit": {"l_shunt": 15, "f0_target": 6, "q_target": 8}}))
    assert main(["dc", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert main(["pce", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_pce_requires_coupler(tmp_path):
    assert main(["pce", *A, "--out", str(tmp_path)]) == 2


def test_pce_spectrum(tmp_path):
    assert main(["pce", *A, "--set", "circuit.c_coupling=0.26", "--out", str(tmp_path)]) == 0
    rows = read(tmp_path / "pce.csv")
    assert rows[0] == ["frequency_hz", "eta_pce", "eta_pce_db"]
    assert len(rows) == 401


def test_fluxfft(tmp_path):
    b = np.linspace(0, 1, 128)
    write_csv(str(tmp_path / "sweep.csv"), ("bias", "f0_hz"),
              zip(b, 6e9 + 2e7 * np.cos(2 * np.pi * 5 * b)))
    code = main(["fluxfft", "--set", f"task.input={tmp_path / 'sweep.csv'}", "--out", str(tmp_path / "o")])
    assert code == 0
    peaks = read(tmp_path / "o/peaks.csv")
    assert abs(int(peaks[1][0]) - 10) <= 1


def test_fluxfft_bad_columns(tmp_path):
    write_csv(str(tmp_path / "s.csv"), ("x", "y"), [(0, 1), (1, 2)])
    assert main(["fluxfft", "--set", f"task.input={tmp_path / 's.csv'}", "--out", str(tmp_path)]) == 2


def test_calibrate(tmp_path):
    v = np.linspace(0.1, 0.5, 6)
    write_csv(str(tmp_path / "cal.csv"), ("drive_v", "qubit_shift_hz"), zip(v, 0.348e6 * 30 * v**2))
    code = main(["calibrate", "--set", f"task.input={tmp_path / 'cal.csv'}", "--set", "task.two_chi=0.348",
                 "--set", "task.kappa=1", "--set", "task.readout_frequency=5.7", "--out", str(tmp_path / "o")])
    assert code == 0
    s = json.load(open(tmp_path / "o/summary.json"))
    assert abs(s["exponent"] - 2) < 1e-6
    assert math.isclose(s["photons_per_v2"], 30.0)


def test_calibrate_bad_fit_exit(tmp_path):
    v = np.linspace(0.1, 0.5, 6)
    write_csv(str(tmp_path / "cal.csv"), ("drive_v", "photons"), zip(v, 30 * v**3))
    code = main(["calibrate", "--set", f"task.input={tmp_path / 'cal.csv'}", "--set", "task.two_chi=0.348",
                 "--set", "task.kappa=1", "--set", "task.readout_frequency=5.7", "--out", str(tmp_path / "o")])
    assert code == 3


def test_fit(tmp_path):
    f = np.linspace(5.5e9, 6.5e9, 201)
    s = reflection_model(f, 6e9, 6e7, 1e-9, 0.9)
    write_csv(str(tmp_path / "t.csv"), ("frequency_hz", "s11_re", "s11_im"), zip(f, s.real, s.imag))
    assert main(["fit", "--set", f"task.input={tmp_path / 't.csv'}", "--out", str(tmp_path / "o")]) == 0
    s = json.load(open(tmp_path / "o/summary.json"))
    assert math.isclose(s["q_total"], 100.0, rel_tol=1e-6)


def test_header_only_csv(tmp_path):
    write_csv(str(tmp_path / "e.csv"), ("a", "b"), [])
    assert (tmp_path / "e.csv").read_text() == "a,b\n"


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


@pytest.mark.slow
def test_tune_failure_exit(tmp_path, capsys):
    # beta = 0.1, Q = 4: 1/(beta Q) = 2.5
    code = main(["tune", "--set", "circuit.l_shunt=6", "--set", "circuit.f0_target=6",
                 "--set", "circuit.q_target=4", "--out", str(tmp_path)])
    assert code == 3
    assert "MaxGainBelowTarget" in capsys.readouterr().err
    assert json.load(open(tmp_path / "summary.json"))["error"] == "MaxGainBelowTarget"


@pytest.mark.slow
def test_map_with_failed_cells(tmp_path):
    code = main(["map", "--set", "task.l_shunt_grid=[8.0]", "--set", "task.q_grid=[8.0]",
                 "--set", "circuit.f0_target=6", "--out", str(tmp_path)])
    assert code == 4
    rows = read(tmp_path / "cells.csv")
    assert len(rows) == 2 and rows[1][rows[0].index("status")] == "no_20db"
