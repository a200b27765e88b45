"""CLI behavior: exit codes, artifacts, determinism, scenario goldens."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import pytest

from ddab.cli import bound_table_rows, main


def scenario_path(name: str) -> str:
    return str(resources.files("ddab.scenarios") / name)


def run_cli(*argv) -> int:
    return main(list(argv))


def test_bound_table_values_and_saturation():
    rows = bound_table_rows(23, 10)
    assert [(k, u) for k, u, _ in rows] == [
        (0, 23), (1, 15), (2, 11), (3, 9), (4, 7), (5, 6),
        (6, 6), (7, 6), (8, 6), (9, 5), (10, 3),
    ]
    notes = {k: note for k, _, note in rows}
    assert notes[10] and not notes[9]  # saturation annotated at the 3Y point


def test_bound_table_path3_single_regime(capsys):
    assert run_cli("bound-table", "--path-len", "3", "--k-max", "4") == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "k,required_defender_assets,note"
    assert all(line.split(",")[1] == "3" for line in out[1:])


def test_bound_table_writes_csv(tmp_path):
    out = tmp_path / "table.csv"
    assert run_cli("bound-table", "--path-len", "23", "--out", str(out)) == 0
    lines = out.read_text().splitlines()
    assert lines[1] == "0,23,"
    assert lines[11].startswith("10,3,saturated")
    assert (tmp_path / "run_meta.json").exists()


@pytest.mark.parametrize("name", ["tracking.json", "boundary.json", "recenter.json"])
def test_scenario_goldens(name, tmp_path, capsys):
    code = run_cli("run", "--config", scenario_path(name), "--out", str(tmp_path / "o"))
    captured = capsys.readouterr()
    assert code == 0, captured.err
    outcome = json.loads(captured.out)
    assert outcome["result"] == "DEFENDED_CYCLE"


def test_scenario_golden_mismatch_detected(tmp_path, capsys):
    doc = json.loads(Path(scenario_path("tracking.json")).read_text())
    doc["expected"]["platoon_centers"]["A"] = [[5], [5]]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    code = run_cli("run", "--config", str(bad), "--out", str(tmp_path / "o"))
    captured = capsys.readouterr()
    assert code == 1
    assert "golden mismatch" in captured.err


def test_run_exit_codes(tmp_path, capsys):
    assert run_cli("run", "--config", str(tmp_path / "missing.json")) == 2
    cfg = {
        "environment": {
            "nodes": ["p1", "p2", "p3"],
            "edges": [["p1", "p2"], ["p2", "p3"]],
            "path": ["p1", "p2", "p3"],
        },
        "k": 0,
        "X": 2,
        "Y": 1,
        "strategy": {"kind": "greedy", "start": "p3"},
    }
    path = tmp_path / "lost.json"
    path.write_text(json.dumps(cfg))
    assert run_cli("run", "--config", str(path)) == 10
    capsys.readouterr()


def test_gadget_gen_round_trip(tmp_path, capsys):
    out = tmp_path / "g.json"
    assert run_cli(
        "gadget-gen", "--path-len", "5", "--k", "1", "--alpha", "4", "--out", str(out)
    ) == 0
    doc = json.loads(out.read_text())
    assert "xi" in doc["nodes"]
    assert doc["gadget"] == {"alpha": 4, "k": 1, "required_assets": "3/1"}
    assert run_cli("gadget-gen", "--path-len", "5", "--k", "1", "--alpha", "1") == 2
    capsys.readouterr()


def test_replay_command(tmp_path, capsys):
    cfg = {
        "environment": {
            "nodes": ["p1", "p2", "p3", "p4", "p5"],
            "edges": [["p1", "p2"], ["p2", "p3"], ["p3", "p4"], ["p4", "p5"]],
            "path": ["p1", "p2", "p3", "p4", "p5"],
        },
        "k": 1,
        "X": 3,
        "Y": 1,
        "strategy": {"kind": "scripted", "start": "p5", "moves": [[["p5", "p4"]]]},
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert run_cli("run", "--config", str(path), "--out", str(tmp_path)) == 0
    capsys.readouterr()
    assert run_cli("replay", "--trace", str(tmp_path / "trace.jsonl")) == 0
    capsys.readouterr()
    assert run_cli("replay", "--trace", str(tmp_path / "nope.jsonl")) == 1
    capsys.readouterr()


def test_verify_subset_corpus(tmp_path, capsys):
    corpus = tmp_path / "corpus.json"
    corpus.write_text(json.dumps({"instances": ["gadget-n3-k0", "chain-n5-k1"]}))
    code = run_cli("verify", "--corpus", str(corpus), "--out", str(tmp_path / "v"), "--jobs", "1")
    captured = capsys.readouterr()
    assert code == 0, captured.out + captured.err
    report = json.loads((tmp_path / "v" / "verify_report.json").read_text())
    assert report["instances"] == 2
    assert report["bracket_failures"] == []
    witness = tmp_path / "v" / "witness-gadget-n3-k0.jsonl"
    assert witness.exists()


def test_verify_empty_corpus_is_usage_error(tmp_path, capsys):
    corpus = tmp_path / "corpus.json"
    corpus.write_text(json.dumps({"instances": []}))
    assert run_cli("verify", "--corpus", str(corpus)) == 2
    capsys.readouterr()


def test_cli_artifacts_byte_identical(tmp_path, capsys):
    corpus = tmp_path / "corpus.json"
    corpus.write_text(json.dumps({"instances": ["gadget-n4-k1"]}))
    blobs = []
    for run_dir in ("a", "b"):
        out = tmp_path / run_dir
        assert run_cli("verify", "--corpus", str(corpus), "--out", str(out), "--jobs", "1") == 0
        capsys.readouterr()
        blob = {
            p.name: p.read_bytes()
            for p in sorted(out.iterdir())
            if p.name != "run_meta.json"
        }
        blobs.append(blob)
    assert blobs[0] == blobs[1]


def test_verify_mutation_negative_control(tmp_path, capsys):
    corpus = tmp_path / "corpus.json"
    corpus.write_text(json.dumps({"instances": ["gadget-n5-k1"]}))
    code = main([
        "verify", "--corpus", str(corpus), "--out", str(tmp_path / "v"),
        "--jobs", "1", "--mutation", "hold",
    ])
    captured = capsys.readouterr()
    assert code == 1, captured.out
    report = json.loads((tmp_path / "v" / "verify_report.json").read_text())
    assert report["bracket_failures"] == ["gadget-n5-k1"]
