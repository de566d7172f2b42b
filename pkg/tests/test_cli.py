import json
import subprocess
import sys

import numpy as np
import pytest

from projphase import experiments as exp
from projphase import injectivity as inj
from projphase import io
from projphase.cli import main
from projphase.errors import InvalidInput
from projphase.projections import sample_collection
from projphase.rng import substream


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_sample_is_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        code, _, err = run(capsys, "sample", "-M", 3, "-N", 5, "--ranks", "1,1,2,2,2",
                           "--seed", 7, "--out", path)
        assert code == 0 and "0 invalid" in err
    assert a.read_bytes() == b.read_bytes()
    c = io.load_collection(a)
    assert c.ranks == [1, 1, 2, 2, 2] and c.provenance["seed"] == 7


def test_sample_invalid_rank(capsys):
    code, _, err = run(capsys, "sample", "-M", 3, "-N", 5, "--ranks", "3,1,1,1,1")
    assert code == 2 and "rank" in err


def test_check_file_matches_in_memory(tmp_path, capsys):
    c = sample_collection(3, [1, 2, 1, 2], substream(3), seed=3)
    path = tmp_path / "c.json"
    io.save_collection(c, path)
    code, out, err = run(capsys, "check", path, "--seed", 5)
    assert code == 0
    from_file = json.loads(out)
    in_memory = json.loads(io.dumps(exp.check_report(c, seed=5)))
    assert from_file == in_memory
    assert from_file["status"] == "WitnessFound"
    assert from_file["collision"]["max_measurement_gap"] <= 1e-10


def test_check_injective(tmp_path, capsys):
    path = tmp_path / "c.json"
    run(capsys, "sample", "-M", 3, "-N", 5, "--seed", 7, "--ranks", "1,1,2,2,2", "--out", path)
    code, out, _ = run(capsys, "check", path)
    report = json.loads(out)
    assert code == 0 and report["status"] == "CertifiedInjective"
    assert report["min_defect"] > 1e-3


def test_check_cross_prints_complement_property(tmp_path, capsys):
    path = tmp_path / "lines.json"
    run(capsys, "sample", "-M", 3, "-N", 5, "--ranks", "1,1,1,1,1", "--seed", 1, "--out", path)
    code, out, err = run(capsys, "check", path)
    cp = json.loads(out)["complement_property"]
    assert code == 0 and cp["holds"] is True and cp["agrees"] is True
    assert "complement property" in err


def test_strict_inconclusive_exit_code(tmp_path, capsys):
    rng = substream(16)
    c = sample_collection(4, [int(r) for r in rng.integers(1, 4, size=7)], rng)
    path = tmp_path / "c.json"
    io.save_collection(c, path)
    code, out, _ = run(capsys, "check", path, "--tol-cert", 0.9, "--restarts", 5)
    assert code == 0 and json.loads(out)["status"] == "Inconclusive"
    code, _, _ = run(capsys, "check", path, "--tol-cert", 0.9, "--restarts", 5, "--strict")
    assert code == 3


def test_grid_budget(tmp_path, capsys):
    path = tmp_path / "c.json"
    io.save_collection(sample_collection(3, [1, 2, 2, 2, 1], substream(0)), path)
    code, _, _ = run(capsys, "check", path, "--grid", 1e-5, "--strict")
    assert code == 3
    code, out, _ = run(capsys, "check", path, "--grid", 1e-5)
    assert code == 0 and json.loads(out)["status"] != "CertifiedInjective"


def test_bad_files_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "check", bad)[0] == 2
    bad.write_text(json.dumps({"ambient_dim": 3, "projections": []}))
    code, _, err = run(capsys, "check", bad)
    assert code == 2 and "projections" in err
    assert run(capsys, "check", tmp_path / "missing.json")[0] == 2


def test_witness_command(tmp_path, capsys):
    path = tmp_path / "c.json"
    io.save_collection(sample_collection(3, [2, 2, 1, 1], substream(2)), path)
    code, out, _ = run(capsys, "witness", path)
    doc = json.loads(out)
    assert code == 0 and doc["found"] and doc["witness"]["residual"] <= 1e-8


def test_reconstruct_from_x_and_file(tmp_path, capsys):
    path = tmp_path / "c.json"
    run(capsys, "sample", "-M", 3, "-N", 5, "--seed", 7, "--ranks", "1,1,2,2,2", "--out", path)
    code, out, _ = run(capsys, "reconstruct", path, "--from-x", "1,-2,0.5",
                       "--csv", tmp_path / "r.csv")
    doc = json.loads(out)
    assert code == 0 and doc["converged"] and doc["recovery_error"] <= 1e-6
    rows = io.read_csv(tmp_path / "r.csv")
    assert list(rows[0]) == io.RECON_COLUMNS and rows[0]["converged"] == "True"
    meas = tmp_path / "b.json"
    meas.write_text(json.dumps(doc["measurements"]))
    code, out2, _ = run(capsys, "reconstruct", path, "--measurements", meas)
    assert code == 0 and json.loads(out2)["x_hat"] == doc["x_hat"]
    assert run(capsys, "reconstruct", path)[0] == 2


def test_sweep_rank_one_sharpness(tmp_path, capsys):
    cfg = tmp_path / "sweep.json"
    cfg.write_text(json.dumps({"M": 2, "N": {"start": 2, "stop": 3}, "ranks": 1,
                               "trials": 100, "seed": 2}))
    out, plot = tmp_path / "out.csv", tmp_path / "plot.dat"
    code, _, _ = run(capsys, "sweep", cfg, "--out", out, "--plot", plot)
    assert code == 0
    rows = io.read_csv(out)
    assert [(r["N"], r["witness_count"]) for r in rows] == [("2", "100"), ("3", "0")]
    for r in rows:
        total = int(r["injective_count"]) + int(r["witness_count"]) + int(r["inconclusive_count"])
        assert total == int(r["trials"])
    assert plot.read_text().startswith("# M N")


def test_sweep_three_dimensional_cells():
    config = exp.SweepConfig.from_dict({"M": 3, "N": [4, 5, 6], "trials": 100, "seed": 1})
    cells = exp.run_sweep(config, workers=1)
    assert cells[0].witness_count == 100
    for cell in cells[1:]:
        assert cell.witness_count == 0
        assert cell.injective_count + cell.inconclusive_count == 100


def test_sweep_is_order_independent(monkeypatch):
    config = exp.SweepConfig.from_dict({"M": [2, 3], "N": 4, "trials": 4, "seed": 9})
    serial = [c.as_row() for c in exp.run_sweep(config, workers=1)]
    parallel = [c.as_row() for c in exp.run_sweep(config, workers=2)]
    for a, b in zip(serial, parallel):
        a.pop("wall_time_s"), b.pop("wall_time_s")
    assert serial == parallel
    monkeypatch.setenv("PROJPHASE_THREADS", "3")
    assert exp.worker_count() == 3


@pytest.mark.parametrize("doc", [
    {"M": 3, "N": []},
    {"M": 3, "N": {"start": 5, "stop": 4}},
    {"M": 3, "N": 4, "trials": 0},
])
def test_sweep_config_errors(doc, tmp_path, capsys):
    with pytest.raises(InvalidInput):
        exp.SweepConfig.from_dict(doc)
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps(doc))
    assert run(capsys, "sweep", cfg)[0] == 2


def test_demo_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(capsys, "demo-ccpw", "--seed", 4, "--out", a)[0] == 0
    assert run(capsys, "demo-ccpw", "--seed", 4, "--out", b, "--strict")[0] == 0
    assert a.read_bytes() == b.read_bytes()
    report = json.loads(a.read_text())
    assert report["W"]["status"] == "CertifiedInjective"
    assert report["W_perp"]["status"] == "WitnessFound"
    assert report["collision"]["max_measurement_gap"] <= 1e-10


def test_full_spark_check():
    assert exp.is_full_spark(np.column_stack([np.eye(3), np.ones(3) / np.sqrt(3)]))
    assert not exp.is_full_spark(np.column_stack([np.eye(3), [1.0, 1.0, 0.0]]))


def test_bounds_table(capsys):
    code, out, _ = run(capsys, "bounds", "-M", "3-5", "-N", "4,6,8")
    assert code == 0
    table = {tuple(line.split()[:2]): line.split() for line in out.splitlines()[1:]}
    assert table[("3", "4")][3] == "True"
    assert table[("4", "6")][3] == "False"
    assert table[("5", "8")][3] == "True"
    assert len(table) == 9


def test_module_entry_point():
    done = subprocess.run([sys.executable, "-m", "projphase", "bounds", "-M", "9", "-N", "16"],
                          capture_output=True, text=True)
    assert done.returncode == 0 and "obstructed" in done.stdout


def test_check_report_verdict_field_names():
    c = sample_collection(2, [1, 1, 1], substream(0))
    r = exp.check_report(c)
    assert r["status"] in {inj.CERTIFIED, inj.WITNESS_FOUND, inj.INCONCLUSIVE}
    assert set(r) >= {"collection", "min_defect", "witness", "budget", "tolerances"}
