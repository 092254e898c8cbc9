import csv
import json

import pytest

from circform.cli import main

SHORT = ["--set", "run.duration=30"]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    body = text.split("section,key,value\n", 1)[1]
    return {(r[0], r[1]): r[2] for r in csv.reader(body.splitlines()) if r}


@pytest.fixture
def flight_dir(tmp_path, capsys):
    out = tmp_path / "run"
    code, text, _ = run(capsys, "simulate", "--config", "paper-flight", "--out", str(out), *SHORT)
    assert code == 0
    return out


def test_simulate_writes_outputs_with_stamp(flight_dir):
    for name in ("trace.csv", "edges.csv", "messages.csv", "config.resolved.yaml", "summary.json"):
        assert (flight_dir / name).exists()
    summary = json.loads((flight_dir / "summary.json").read_text())
    assert summary["schema_version"] == 1
    for name in ("trace.csv", "edges.csv", "messages.csv", "config.resolved.yaml"):
        assert (flight_dir / name).read_text().startswith(f"# schema_version=1 config_hash={summary['config_hash']}")


def test_simulate_text_and_json(tmp_path, capsys):
    code, text, _ = run(capsys, "simulate", "--config", "two-agent-minimal", "--out", str(tmp_path), *SHORT)
    assert code == 0 and text.startswith("# schema_version=1 config_hash=")
    code, text, _ = run(capsys, "simulate", "--config", "two-agent-minimal", "--out", str(tmp_path),
                        "--format", "json", *SHORT)
    payload = json.loads(text)
    assert payload["schema_version"] == 1 and payload["command"] == "simulate"


def test_seed_override_changes_hash_not_validity(tmp_path, capsys):
    hashes = set()
    for seed in ("1", "2"):
        code, text, _ = run(capsys, "simulate", "--config", "paper-flight", "--out", str(tmp_path / seed),
                            "--seed", seed, *SHORT)
        assert code == 0
        hashes.add(text.split("config_hash=")[1].split()[0])
    assert len(hashes) == 2


def test_invalid_gain_exits_2_with_inequality(tmp_path, capsys):
    code, _, err = run(capsys, "simulate", "--config", "paper-flight", "--out", str(tmp_path),
                       "--set", "formation.k_r=13")
    assert code == 2
    assert "80 - pi*13*2" in err and "<= 0" in err


def test_degenerate_geometry_exits_3(tmp_path, capsys):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("agents:\n  - {x: 0.0, y: 0.0, psi_deg: 0.0}\nrun: {duration: 1.0}\n")
    code, _, err = run(capsys, "simulate", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert code == 3
    assert "t=0.000s agent 1" in err


def test_graph_check(capsys):
    code, text, _ = run(capsys, "graph-check", "--vertices", "3", "--edges", "1-2,2-3")
    r = rows(text)
    assert code == 0
    assert r[("B", "row2")] == "-1 1" and r[("graph", "hurwitz")] == "True"
    assert float(r[("graph", "max_real_eigenvalue")]) == pytest.approx(-1.0)
    code, text, _ = run(capsys, "graph-check", "--vertices", "3", "--edges", "1-2,2-3,3-1")
    assert rows(text)[("graph", "hurwitz")] == "False"
    code, _, err = run(capsys, "graph-check", "--vertices", "3", "--edges", "1-1")
    assert code == 2 and "self-loop" in err


def test_linearize_and_confinement(capsys, flight_dir):
    code, text, _ = run(capsys, "linearize", "--config", "paper-flight")
    r = rows(text)
    assert code == 0 and float(r[("linearize", "slowest_rate")]) == pytest.approx(0.01625)
    code, text, _ = run(capsys, "linearize", "--config", "paper-flight", "--speed", "1")
    assert float(rows(text)[("eigenvalue", "1")]) == pytest.approx(-0.00375)
    code, text, _ = run(capsys, "confinement", "--config", "paper-flight", "--trace", str(flight_dir))
    r = rows(text)
    assert float(r[("confinement", "predicted")]) == pytest.approx(130.265, abs=1e-3)
    assert float(r[("confinement", "max_distance")]) < 130.265


def test_metrics_and_rows_file(capsys, flight_dir, tmp_path):
    out = tmp_path / "rows.csv"
    code, text, _ = run(capsys, "metrics", "--trace", str(flight_dir), "--rows", str(out))
    assert code == 0
    assert ("run", "half_error_time") in rows(text)
    assert out.read_text().startswith("# schema_version=1 config_hash=")


def test_metrics_on_truncated_trace_exits_2(capsys, flight_dir):
    p = flight_dir / "trace.csv"
    p.write_text("\n".join(p.read_text().splitlines()[:50]) + "\n")
    code, _, err = run(capsys, "metrics", "--trace", str(flight_dir))
    assert code == 2 and "truncated" in err


def test_plotdata(capsys, tmp_path):
    run_dir = tmp_path / "run"
    assert run(capsys, "simulate", "--config", "paper-flight", "--out", str(run_dir),
               "--set", "run.duration=60")[0] == 0
    plot = tmp_path / "plot"
    code, text, _ = run(capsys, "plotdata", "--trace", str(run_dir), "--out", str(plot), "--every", "5")
    assert code == 0
    errors = (plot / "errors.csv").read_text().splitlines()
    assert errors[1] == "t,edge,agent,e_theta,band_low,band_high"
    assert errors[2].endswith(",-10.0,10.0")
    circles = (plot / "circles.csv").read_text()
    assert "target," in circles and "confinement," in circles
    gaps = list(csv.reader((plot / "gaps.csv").read_text().splitlines()[2:]))
    # the blackout starts at t=150 s (start 131 + 60 s ends at 191 s)
    assert any(float(a) <= 150.0 and float(b) >= 170.0 for _, _, a, b in gaps)


def test_plotdata_single_agent(capsys, tmp_path):
    cfg = tmp_path / "one.yaml"
    cfg.write_text("agents:\n  - {x: 120.0, y: 0.0, psi_deg: 90.0}\nrun: {duration: 40.0}\n")
    assert run(capsys, "simulate", "--config", str(cfg), "--out", str(tmp_path / "r"))[0] == 0
    assert run(capsys, "plotdata", "--trace", str(tmp_path / "r"), "--out", str(tmp_path / "p"))[0] == 0
    last = (tmp_path / "p" / "xy.csv").read_text().splitlines()[-1].split(",")
    assert abs((float(last[2]) ** 2 + float(last[3]) ** 2) ** 0.5 - 80.0) < 0.5


def test_sweep_marks_rejected_runs(capsys, tmp_path):
    table = tmp_path / "sweep.csv"
    code, text, _ = run(capsys, "sweep", "--config", "paper-flight", "--grid", "formation.k_r=8,13",
                        "--set", "run.duration=10", "--out", str(table))
    assert code == 0
    lines = list(csv.DictReader(table.read_text().splitlines()[1:]))
    status = {r["overrides"].split()[-1]: r["status"] for r in lines}
    assert status == {"formation.k_r=8": "ok", "formation.k_r=13": "rejected"}


def test_sweep_seeds_and_jobs(capsys, tmp_path):
    table = tmp_path / "sweep.csv"
    code, text, _ = run(capsys, "sweep", "--config", "two-agent-minimal", "--grid", "network.loss=0,0.5",
                        "--seeds", "0:2", "--jobs", "2", "--set", "run.duration=20", "--out", str(table))
    assert code == 0
    lines = list(csv.DictReader(table.read_text().splitlines()[1:]))
    assert len(lines) == 4 and all(r["status"] == "ok" for r in lines)
    assert ("network.loss=0.5", "settled_fraction") in rows(text)


def test_sweep_records_runtime_failures(capsys, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("agents:\n  - {x: 0.0, y: 0.0, psi_deg: 0.0}\nrun: {duration: 1.0}\n")
    table = tmp_path / "t.csv"
    code, _, _ = run(capsys, "sweep", "--config", str(bad), "--grid", "run.duration=1,2", "--out", str(table))
    assert code == 0
    lines = list(csv.DictReader(table.read_text().splitlines()[1:]))
    assert [r["status"] for r in lines] == ["error", "error"]


def test_empty_grid(capsys, tmp_path):
    table = tmp_path / "t.csv"
    code, text, _ = run(capsys, "sweep", "--config", "paper-flight", "--grid", "formation.k_r=", "--out", str(table))
    assert code == 0
    assert len(table.read_text().splitlines()) == 2
