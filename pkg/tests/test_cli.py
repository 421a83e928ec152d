"""Command-line front end: artifacts, determinism, and exit codes."""

import csv
import json
import math
from pathlib import Path

import pytest

from pzdcap.cli import main

FAST_SOLVE = {
    "constraint": {"regime": "peak", "rho": 0.5},
    "sim": {"steps": 100, "samples": 10_000, "seed": 4},
}


def _write_config(tmp_path: Path, doc: dict) -> str:
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return str(path)


def _read_csv(path: Path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_pdf_grid_and_sidecar(tmp_path):
    out = tmp_path / "artifacts"
    code = main(
        ["pdf", "--r0", "2.0", "--phi0", "0.7", "--grid", "40x40", "--out", str(out)]
    )
    assert code == 0
    rows = _read_csv(out / "pdf.csv")
    assert len(rows) == 1600
    side = json.loads((out / "pdf.config.json").read_text())
    assert side["r0"] == 2.0 and side["grid"] == [40, 40]
    assert side["tail_bound"] < 1e-9
    assert side["config"]["channel"]["gamma"] == 1.0
    mass = sum(float(r["density"]) for r in rows) * side["cell_area"]
    assert abs(mass - 1.0) < 1e-3
    assert min(float(r["density"]) for r in rows) >= -side["tail_bound"]


def test_pdf_csv_dialect(tmp_path):
    main(["pdf", "--r0", "1.0", "--grid", "8x8", "--out", str(tmp_path)])
    raw = (tmp_path / "pdf.csv").read_bytes()
    assert b"\r" not in raw
    text = raw.decode()
    assert text.splitlines()[0] == "r,phi,density"
    # float64 round trip: re-parsing reproduces the value bit for bit
    cell = text.splitlines()[1].split(",")[2]
    assert repr(float(cell)) == cell


def test_rerun_is_byte_identical(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    args = ["pdf", "--r0", "1.2", "--grid", "16x16", "--out", "run"]
    assert main(args) == 0
    first = {p.name: p.read_bytes() for p in (tmp_path / "run").iterdir()}
    assert main(args) == 0
    second = {p.name: p.read_bytes() for p in (tmp_path / "run").iterdir()}
    assert first == second


def test_capacity_kkt_mc_round_trip(tmp_path):
    cfg = _write_config(tmp_path, FAST_SOLVE)
    out = tmp_path / "cap"
    assert main(["capacity", "--config", cfg, "--out", str(out)]) == 0
    doc = json.loads((out / "capacity.json").read_text())
    assert doc["certified"] is True
    assert doc["n_rings"] == len(doc["radii"]) == len(doc["probs"])
    assert doc["capacity_nats"] == pytest.approx(0.18910812194, abs=1e-6)

    lhs = _read_csv(out / "lhs.csv")
    assert list(lhs[0]) == ["r0", "lhs_nats", "envelope_lower", "envelope_upper"]
    for row in lhs:
        lo = float(row["envelope_lower"])
        hi = float(row["envelope_upper"])
        val = float(row["lhs_nats"])
        assert lo - 1e-9 <= val <= hi + 1e-9
    assert (out / "capacity.config.json").exists()
    assert (out / "lhs.config.json").exists()

    solution = str(out / "capacity.json")
    assert main(["kkt", "--config", cfg, "--constellation", solution, "--out", str(out)]) == 0
    kkt = json.loads((out / "kkt.json").read_text())
    assert kkt["certified"] is True
    assert kkt["mi_nats"] == pytest.approx(doc["capacity_nats"], abs=1e-9)

    assert main(["mc", "--config", cfg, "--constellation", solution, "--out", str(out)]) == 0
    mc = json.loads((out / "mc.json").read_text())
    gap = abs(mc["mi_mc"] - mc["mi_quadrature"])
    assert gap < 4.0 * mc["stderr"]
    assert mc["samples_discarded"] <= 0.001 * mc["samples_used"]
    assert 0.0 <= mc["goodness"]["p_value"] <= 1.0


def test_audit_command(tmp_path, capsys):
    out = tmp_path / "audit"
    assert main(["audit", "--points", "500", "--out", str(out)]) == 0
    table = capsys.readouterr().out
    assert "pass" in table
    doc = json.loads((out / "audit.json").read_text())
    assert doc["all_passed"] is True
    assert doc["point_count"] == 500
    assert len(doc["results"]) >= 20


def test_audit_with_tight_peak_constraint(tmp_path):
    # The reference constellations reach radius 2.4, so the audit must keep
    # working when the constraint box is smaller than that.
    cfg = _write_config(tmp_path, {"constraint": {"regime": "peak", "rho": 1.5}})
    out = tmp_path / "audit"
    assert main(["audit", "--points", "500", "--config", cfg, "--out", str(out)]) == 0
    doc = json.loads((out / "audit.json").read_text())
    assert doc["all_passed"] is True


def test_sweep_monotone(tmp_path):
    cfg = _write_config(tmp_path, {"solver": {"ring_counts": [1, 3]}})
    out = tmp_path / "sweep"
    code = main(
        ["sweep", "--param", "rho", "--values", "0.3,0.6", "--config", cfg, "--out", str(out)]
    )
    assert code == 0
    rows = _read_csv(out / "sweep.csv")
    assert len(rows) == 2
    assert float(rows[0]["capacity_nats"]) <= float(rows[1]["capacity_nats"])
    side = json.loads((out / "sweep.config.json").read_text())
    assert side["param"] == "rho" and side["values"] == [0.3, 0.6]


def test_flag_overrides_config(tmp_path):
    cfg = _write_config(tmp_path, {"sim": {"seed": 7}})
    out = tmp_path / "pdfdir"
    main(["pdf", "--r0", "0.5", "--grid", "4x4", "--config", cfg, "--seed", "9", "--out", str(out)])
    side = json.loads((out / "pdf.config.json").read_text())
    assert side["config"]["sim"]["seed"] == 9
    assert side["config"]["sim"]["steps"] == 1000


def test_error_exits(tmp_path, capsys):
    bad_cfg = tmp_path / "bad.json"
    bad_cfg.write_text('{"bogus": 1}')
    assert main(["pdf", "--r0", "1.0", "--config", str(bad_cfg), "--out", str(tmp_path)]) == 1
    assert "error:" in capsys.readouterr().err

    assert main(["sweep", "--param", "rho", "--values", "2,1", "--out", str(tmp_path)]) == 1
    assert main(["pdf", "--r0", "1.0", "--rmax", "-2", "--out", str(tmp_path)]) == 1
    assert main(["kkt", "--constellation", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 1

    # infeasible constellation for the configured constraint set
    far = tmp_path / "far.json"
    far.write_text('{"radii": [9.0], "probs": [1.0]}')
    assert main(["kkt", "--constellation", str(far), "--out", str(tmp_path)]) == 1


def test_uncertified_solve_still_exits_zero(tmp_path):
    # a one-ring cap at rho = 3 cannot satisfy the certificate
    cfg = _write_config(
        tmp_path,
        {"constraint": {"regime": "peak", "rho": 3.0}, "solver": {"ring_counts": [1, 1]}},
    )
    out = tmp_path / "uncert"
    assert main(["capacity", "--config", cfg, "--out", str(out)]) == 0
    doc = json.loads((out / "capacity.json").read_text())
    assert doc["certified"] is False


def test_threads_env_cap(monkeypatch):
    from pzdcap import cli

    for var in cli._THREAD_VARS:
        monkeypatch.setenv(var, "sentinel")
    monkeypatch.setenv("PZD_NUM_THREADS", "2")
    cli._apply_thread_cap(None)
    assert [__import__("os").environ[v] for v in cli._THREAD_VARS] == ["2"] * 4
    cli._apply_thread_cap(3)
    assert __import__("os").environ["OMP_NUM_THREADS"] == "3"
    with pytest.raises(ValueError):
        cli._apply_thread_cap(0)
