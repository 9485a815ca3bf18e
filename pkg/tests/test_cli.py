from __future__ import annotations

import csv
import json
import shutil
import subprocess
import sys

import pytest

from mwgame.cli import CSV_COLUMNS, read_records, run

from .conftest import SETI

CONTRACTOR = dict(wpc=2.0, wct=1.0, s=2.0, mpw=6.0, mcv=5.0, mbr=10.0,
                  scenario="contractor", tunable="n", margin=0.02)


@pytest.fixture
def seti_cfg(tmp_path):
    path = tmp_path / "seti.json"
    path.write_text(json.dumps(SETI | {"scenario": "seti", "margin": 0.01}))
    return str(path)


@pytest.fixture
def contractor_cfg(tmp_path):
    path = tmp_path / "contractor.json"
    path.write_text(json.dumps(CONTRACTOR))
    return str(path)


def test_design_simulate_verify_pipeline(tmp_path, seti_cfg, capsys):
    plan, cert = tmp_path / "plan.json", tmp_path / "cert.json"
    assert run(["design", "--config", seti_cfg, "--out", str(plan),
                "--certificate", str(cert)]) == 0
    assert "game=0n model=rnone n=1 pv=0.01" in capsys.readouterr().out
    records = tmp_path / "sim.jsonl"
    assert run(["simulate", "--plan", str(plan), "--trials", "20000", "--seed", "1",
                "--records", str(records)]) == 0
    (rec,) = read_records(records)
    assert rec["subcommand"] == "simulate" and rec["timestamp"] is None
    assert rec["results"]["report"]["empirical_p_wrong"] == 0.0
    assert run(["verify", "--certificate", str(cert), "--partitions", "1|1,1,1|2,1"]) == 0
    assert capsys.readouterr().out.count(": unique") == 3


def test_plan_read_from_design_record(tmp_path, contractor_cfg):
    records = tmp_path / "design.jsonl"
    assert run(["design", "--config", contractor_cfg, "--records", str(records)]) == 0
    (rec,) = read_records(records)
    assert rec["results"]["plan"]["model"] == "ra"
    assert run(["simulate", "--plan", str(records), "--trials", "1000", "--seed", "3"]) == 0
    assert run(["verify", "--certificate", str(records)]) == 0


def test_simulate_is_byte_identical(tmp_path, seti_cfg):
    plan = tmp_path / "plan.json"
    run(["design", "--config", seti_cfg, "--out", str(plan)])
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}.jsonl"
        assert run(["simulate", "--plan", str(plan), "--trials", "5000", "--seed", "7",
                    "--records", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_stamp_adds_timestamp(tmp_path, seti_cfg):
    out = tmp_path / "r.jsonl"
    run(["design", "--config", seti_cfg, "--records", str(out), "--stamp"])
    assert read_records(out)[0]["timestamp"]


def test_seed_is_required(tmp_path, seti_cfg, capsys):
    plan = tmp_path / "plan.json"
    run(["design", "--config", seti_cfg, "--out", str(plan)])
    with pytest.raises(SystemExit) as exc:
        run(["simulate", "--plan", str(plan)])
    assert exc.value.code == 2


def test_exit_codes(tmp_path, seti_cfg, contractor_cfg):
    assert run(["design", "--config", str(tmp_path / "missing.json")]) == 2
    assert run(["design", "--config", seti_cfg, "--scenario", "contractor"]) == 2
    tight = tmp_path / "tight.json"
    tight.write_text(json.dumps(CONTRACTOR | {"tunable": "s", "wpc": 3.0, "mcv": 4.0}))
    assert run(["design", "--config", str(tight)]) == 3
    cert = tmp_path / "cert.json"
    run(["design", "--config", contractor_cfg, "--certificate", str(cert)])
    data = json.loads(cert.read_text())
    data["pv"] = 0.1
    cert.write_text(json.dumps(data))
    records = tmp_path / "verify.jsonl"
    assert run(["verify", "--certificate", str(cert), "--records", str(records)]) == 4
    assert read_records(records)[0]["results"]["all_unique"] is False


def test_bad_deviation_is_config_error(tmp_path, seti_cfg):
    plan = tmp_path / "plan.json"
    run(["design", "--config", seti_cfg, "--out", str(plan)])
    assert run(["simulate", "--plan", str(plan), "--seed", "1", "--deviate", "4:1"]) == 2
    assert run(["simulate", "--plan", str(plan), "--seed", "1", "--deviate", "0:1",
                "--trials", "2000"]) == 0


def test_majority_output(capsys):
    assert run(["majority", "--groups", "1,1,1", "--pc", "0.2"]) == 0
    out = capsys.readouterr().out.strip()
    assert out.startswith("P_C = ") and float(out[6:]) == pytest.approx(0.104, abs=1e-15)
    assert run(["majority", "--groups", "2,1", "--pc", "1,0"]) == 0
    assert capsys.readouterr().out.strip() == "P_C = 1.0"
    assert run(["majority", "--groups", "1,1", "--pc", "0.2"]) == 2


def test_analyze_rows(tmp_path, capsys):
    cfg = tmp_path / "base.json"
    cfg.write_text(json.dumps(dict(wpc=2, wct=1, wba=2, mpw=3, mca=1, mcv=1, mbr=5)))
    assert run(["analyze", "--game", "1v1n", "--model", "rm", "--n", "3",
                "--config", str(cfg)]) == 0
    assert "0.1171875" in capsys.readouterr().out
    assert run(["analyze", "--game", "0n", "--model", "ra", "--pv", "0.1",
                "--config", str(cfg)]) == 3


def test_sweep_csv(tmp_path, contractor_cfg):
    out = tmp_path / "sweep.csv"
    assert run(["sweep", "--config", contractor_cfg, "--param", "mcv", "--from", "3",
                "--to", "5", "--steps", "5", "--csv", str(out)]) == 0
    raw = out.read_bytes()
    assert raw.count(b"\r\n") == 6
    rows = list(csv.DictReader(raw.decode().splitlines()))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [r["value"] for r in rows] == ["3.0", "3.5", "4.0", "4.5", "5.0"]
    assert [r["model"] for r in rows] == ["rnone", "rnone", "ra", "ra", "ra"]


def test_sweep_records_errors(tmp_path, contractor_cfg):
    records = tmp_path / "s.jsonl"
    assert run(["sweep", "--config", contractor_cfg, "--param", "mcv", "--from", "5",
                "--to", "7", "--steps", "3", "--records", str(records)]) == 0
    recs = read_records(records)
    assert len(recs) == 3
    assert "error" in recs[-1]["results"]


def test_sweep_pc_column(tmp_path, contractor_cfg, capsys):
    assert run(["sweep", "--config", contractor_cfg, "--param", "pc", "--from", "0",
                "--to", "0.5", "--steps", "2", "--n", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[-1].endswith(",0.5")


@pytest.mark.skipif(shutil.which("mwgame") is None, reason="console script not installed")
def test_console_script_version():
    out = subprocess.run(["mwgame", "--version"], capture_output=True, text=True, check=True)
    assert out.stdout.strip()


def test_module_entry_exit_code(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mwgame.cli", "majority", "--pc", "0.1"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
