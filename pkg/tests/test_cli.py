"""Command-line surface: exit codes, record streams, grids, checklist."""

import csv
import json
import math
import os

import pytest

from hiddenpath.attacks import parse_constraint_instance
from hiddenpath.cli import main
from hiddenpath.config import save_grid, save_params
from hiddenpath.fieldcore import Boundary, decode_object
from hiddenpath.infometrics import CAVEAT
from hiddenpath.observables import (
    LinearProjected,
    NonlinearLocal,
    Telescoping,
)

from conftest import make_params, seed


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    """Parameter files shared by the CLI tests, written once."""
    d = tmp_path_factory.mktemp("cli")

    def save(name, p):
        path = str(d / name)
        save_params(p, path)
        return path

    lin = make_params(
        q=5, n=1, T=3, macro=((1,), (2,)), micro=((0,),),
        family=LinearProjected.generate(6, 3, seed(5), q=5, n=1, T=3),
        boundary=Boundary(start=(0,)))
    tele = make_params(
        q=5, n=1, T=3, macro=((1,), (2,)), micro=((0,), (1,), (3,)),
        family=Telescoping.generate(3, seed(7), q=5, n=1, T=3))
    nonlin = make_params(
        q=5, n=1, T=5, seed_byte=0x23,
        family=NonlinearLocal.generate(10, 3, seed(3), q=5, n=1, T=5),
        boundary=Boundary(start=(0,)))
    comp = make_params(
        q=6, n=1, T=3,
        family=LinearProjected.generate(4, 3, seed(8), q=6, n=1, T=3),
        boundary=Boundary(start=(0,)))
    return {
        "dir": d,
        "linear": save("linear.json", lin),
        "linear_params": lin,
        "tele": save("tele.json", tele),
        "nonlinear": save("nonlinear.json", nonlin),
        "composite": save("composite.json", comp),
    }


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# ---------------------------------------------------------------------------
# basic subcommands
# ---------------------------------------------------------------------------

def test_gen_prints_decodable_witnesses(capsys, files):
    code, out, err = run(capsys, "gen", "--params", files["linear"],
                         "--count", "3", "--diagnostics")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 3
    p = files["linear_params"]
    for line in lines:
        decode_object(bytes.fromhex(line), p)
    assert "macro entropy" in err


def test_observe_round_trips_from_gen(capsys, files):
    _, out, _ = run(capsys, "gen", "--params", files["linear"])
    witness = out.strip().splitlines()[0]
    code, out, _ = run(capsys, "observe", "--params", files["linear"],
                       "--witness", witness)
    assert code == 0
    assert "entries:" in out and "serialized:" in out


def test_observe_rejects_bad_witness(capsys, files):
    code, _, err = run(capsys, "observe", "--params", files["linear"],
                       "--witness", "00ff00")
    assert code == 2
    assert "config error" in err


def test_enumerate_reports_structure(capsys, files):
    code, out, _ = run(capsys, "enumerate", "--params", files["tele"])
    assert code == 0
    assert "support size: 1080" in out     # 5 * (2*3)^3, free start
    assert "injective:" in out


def test_enumerate_cap_exit(capsys, files):
    code, out, _ = run(capsys, "enumerate", "--params", files["tele"],
                       "--cap", "10")
    assert code == 3
    assert "skipped" in out


def test_export_and_reveal(capsys, files, tmp_path):
    out_file = str(tmp_path / "inst.json")
    code, out, _ = run(capsys, "export", "--params", files["linear"],
                       "--out", out_file, "--reveal")
    assert code == 0
    assert "planted witness:" in out
    p2, y2 = parse_constraint_instance(out_file)
    assert p2 == files["linear_params"]
    witness = out.split("planted witness:")[1].strip()
    x = decode_object(bytes.fromhex(witness), p2)
    from hiddenpath.observables import eval_observable
    assert eval_observable(p2.family, x, p2).entries == y2.entries


# ---------------------------------------------------------------------------
# metrics records
# ---------------------------------------------------------------------------

def test_metrics_record_stream(capsys, files, tmp_path):
    rec_file = str(tmp_path / "m.jsonl")
    code, out, _ = run(capsys, "metrics", "--params", files["tele"],
                       "--label", "cellA", "--records", rec_file)
    assert code == 0
    records = [json.loads(line) for line in open(rec_file)]
    assert records
    for r in records:
        assert set(r) == {"schema", "label", "module", "metric", "value",
                          "provenance", "ci_low", "ci_high"}
        assert r["schema"] == 1
        assert r["label"] == "cellA"
    metrics = {r["metric"]: r for r in records}
    assert metrics["support_size"]["value"] == 1080
    # generic-hardness numbers never travel without their caveat
    assert "security_bits_classical" in metrics
    assert metrics["security_caveat"]["value"] == CAVEAT
    assert CAVEAT in out or "security_caveat" in out


# ---------------------------------------------------------------------------
# attacks
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("method,extra", [
    ("affine", ()),
    ("dp", ()),
    ("mitm", ("--split", "1")),
    ("local-search", ("--budget", "300")),
    ("telescope", ("--probes", "100")),
    ("distinguisher", ("--keys", "64")),
    ("periodicity", ()),
])
def test_attack_methods_run(capsys, files, method, extra):
    code, out, _ = run(capsys, "attack", "--params", files["linear"],
                       "--method", method, *extra)
    assert code == 0
    assert ("outcome:" in out or "period" in out or "reject" in out
            or "endpoint_determined" in out)


def test_attack_affine_recovers_full_rank(capsys, files):
    code, out, _ = run(capsys, "attack", "--params", files["linear"],
                       "--method", "affine")
    assert code == 0
    assert "planted-recovered" in out


# ---------------------------------------------------------------------------
# games
# ---------------------------------------------------------------------------

def test_game_paired_run(capsys, files):
    code, out, _ = run(capsys, "game", "--params", files["tele"],
                       "--adversary", "bayes-fiber", "--trials", "100",
                       "--scores")
    assert code == 0
    assert "ow " in out or "ow_" in out or "ow:" in out
    assert "rel" in out
    assert "hierarchy" in out


def test_game_kdf_check(capsys, files):
    code, out, _ = run(capsys, "game", "--params", files["tele"],
                       "--kdf", "hash-of-observable")
    assert code == 0
    assert "factors" in out
    code, out, _ = run(capsys, "game", "--params", files["tele"],
                       "--kdf", "hash-of-encoding")
    assert code == 0
    assert "counterexample" in out


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

def _grid_cfg(tmp_path, out_name):
    from hiddenpath.config import grid_from_dict
    doc = {
        "format": "hiddenpath-grid", "version": 1, "seed": "13" * 32,
        "output_dir": str(tmp_path / out_name), "trials": 80,
        "adversaries": ["random-guess", "bayes-fiber"],
        "cells": {
            "alpha": {"modulus": 5, "n": 1, "T": 2,
                      "macro_alphabet": [[1], [2]],
                      "micro_alphabet": [[0], [3]],
                      "noise": {"enabled": False},
                      "boundary": {"start": [0], "end": None},
                      "family": {"variant": "linear_projected",
                                 "m": 3, "ell": 3}},
            "beta": {"modulus": 7, "n": 1, "T": 3,
                     "macro_alphabet": [[1], [2]],
                     "micro_alphabet": [[0], [3]],
                     "noise": {"enabled": False},
                     "boundary": {"start": [0], "end": None},
                     "family": {"variant": "transition_energy",
                                "m": 4, "ell": 3}},
        },
    }
    cfg = grid_from_dict(doc)
    path = str(tmp_path / f"{out_name}.json")
    save_grid(cfg, path)
    return path, doc["output_dir"]


def test_grid_runs_and_reproduces(capsys, tmp_path):
    cfg1, out1 = _grid_cfg(tmp_path, "run1")
    code, out, _ = run(capsys, "grid", "--config", cfg1)
    assert code == 0
    assert "cell alpha: ok" in out and "cell beta: ok" in out
    rec1 = open(os.path.join(out1, "records.jsonl"), "rb").read()
    assert os.path.exists(os.path.join(out1, "records.csv"))
    report = open(os.path.join(out1, "report.txt")).read()
    assert "cell status:" in report
    # the pivot keeps one-way and relation columns apart
    assert "ow" in report and "rel" in report

    cfg2, out2 = _grid_cfg(tmp_path, "run2")
    run(capsys, "grid", "--config", cfg2)
    rec2 = open(os.path.join(out2, "records.jsonl"), "rb").read()
    assert rec2 == rec1

    cfg3, out3 = _grid_cfg(tmp_path, "run3")
    run(capsys, "grid", "--config", cfg3, "--workers", "2")
    rec3 = open(os.path.join(out3, "records.jsonl"), "rb").read()
    assert rec3 == rec1

    # internal consistency: measured bayes rate sits on the exact ratio
    records = [json.loads(line) for line in rec1.decode().splitlines()]
    by = {(r["label"], r["metric"]): r for r in records}
    for label in ("alpha", "beta"):
        p_guess = by[(label, "p_guess")]["value"]
        ow = by[(label, "ow_advantage:bayes-fiber")]["value"]
        se = math.sqrt(p_guess * (1 - p_guess) / 80)
        assert abs(ow - p_guess) <= 4 * se + 1e-9
        rel = by[(label, "rel_advantage:bayes-fiber")]["value"]
        assert rel >= ow


def test_grid_csv_matches_jsonl(capsys, tmp_path):
    cfg, out_dir = _grid_cfg(tmp_path, "runcsv")
    run(capsys, "grid", "--config", cfg)
    records = [json.loads(line)
               for line in open(os.path.join(out_dir, "records.jsonl"))]
    with open(os.path.join(out_dir, "records.csv")) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(records)
    assert rows[0]["label"] == records[0]["label"]
    assert rows[0]["metric"] == records[0]["metric"]


# ---------------------------------------------------------------------------
# checklist
# ---------------------------------------------------------------------------

def test_checklist_rejects_telescoping(capsys, files):
    code, out, _ = run(capsys, "checklist", "--params", files["tele"])
    assert code == 0
    assert "verdict: reject" in out
    assert "linear collapse" in out
    assert "(ii) fail" in out and "exact affine model" in out


def test_checklist_passes_quadratic_fixture(capsys, files):
    code, out, _ = run(capsys, "checklist", "--params", files["nonlinear"])
    assert code == 0
    assert "verdict: survives implemented filters" in out
    assert "(ii) pass" in out
    assert "delegated" in out


def test_checklist_composite_modulus_degrades_gracefully(capsys, files):
    code, out, _ = run(capsys, "checklist", "--params", files["composite"])
    assert code == 0
    assert "(ii) not-applicable" in out
    assert "composite" in out
    assert "verdict:" in out


# ---------------------------------------------------------------------------
# report merge
# ---------------------------------------------------------------------------

def test_report_merges_and_counts(capsys, tmp_path, files):
    r1 = str(tmp_path / "a.jsonl")
    r2 = str(tmp_path / "b.jsonl")
    run(capsys, "metrics", "--params", files["tele"], "--label", "t1",
        "--records", r1)
    run(capsys, "metrics", "--params", files["linear"], "--label", "t2",
        "--records", r2)
    out_dir = str(tmp_path / "merged")
    code, out, _ = run(capsys, "report", "--records", r1, r2,
                       "--out-dir", out_dir)
    assert code == 0
    merged = [json.loads(line)
              for line in open(os.path.join(out_dir, "merged.jsonl"))]
    n1 = sum(1 for _ in open(r1))
    n2 = sum(1 for _ in open(r2))
    assert len(merged) == n1 + n2
    assert {r["label"] for r in merged} == {"t1", "t2"}


def test_report_empty_input_is_valid(capsys, tmp_path):
    empty = str(tmp_path / "empty.jsonl")
    open(empty, "w").close()
    out_dir = str(tmp_path / "emptyrep")
    code, out, _ = run(capsys, "report", "--records", empty,
                       "--out-dir", out_dir)
    assert code == 0
    assert os.path.exists(os.path.join(out_dir, "merged.jsonl"))
    assert os.path.exists(os.path.join(out_dir, "report.txt"))


def test_report_rejects_bad_schema(capsys, tmp_path):
    bad = str(tmp_path / "bad.jsonl")
    with open(bad, "w") as fh:
        fh.write(json.dumps({"schema": 99, "label": "x"}) + "\n")
    code, _, err = run(capsys, "report", "--records", bad,
                       "--out-dir", str(tmp_path / "o"))
    assert code == 2
    assert "config error" in err


# ---------------------------------------------------------------------------
# exit codes
# ---------------------------------------------------------------------------

def test_usage_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 1
    capsys.readouterr()
    with pytest.raises(SystemExit) as e:
        main(["no-such-command"])
    assert e.value.code == 1
    capsys.readouterr()
    with pytest.raises(SystemExit) as e:
        main(["attack", "--params", "x.json", "--method", "warp-drive"])
    assert e.value.code == 1
    capsys.readouterr()


def test_missing_file_exits_two(capsys):
    code, _, err = run(capsys, "gen", "--params", "/does/not/exist.json")
    assert code == 2
    assert "config error" in err
