"""Acceptance gate: one test per guaranteed property, full tolerances.

Every expected value here is recomputed by an oracle that does not share
code with the implementation under test (block counting for the bound,
exhaustive search for the brackets, direct re-simulation for goldens).
Each test prints a single PASS line on success; a failure reads as the
criterion name.
"""

from __future__ import annotations

import json
import random
import time
import zlib
from fractions import Fraction
from pathlib import Path

import pytest

from ddab.adversary import RandomStrategy
from ddab.cli import main as cli_main
from ddab.engine import (
    ATTACKER_WIN,
    Game,
    GameConfig,
    read_trace,
    replay,
    run_game,
    subgame_defender_sum,
)
from ddab.gadgets import desk_corpus
from ddab.graph import Environment
from ddab.policy import required_assets, required_units
from ddab.state import AttackerGroup, GameState, Phase, is_safe
from ddab.verifier import ATTACKER_WINS, SAFE_CLOSED, verify_necessity, verify_sufficiency

CORPUS = desk_corpus()


def _report(name: str) -> None:
    print(f"ACCEPTANCE {name}: PASS")


# -- 1. bound table ------------------------------------------------------------


def test_bound_table_against_block_oracle():
    def oracle(path_len: int, k: int) -> int:
        width = 2 * k + 3
        full_blocks, pos = 0, 0
        while pos + width <= path_len:
            full_blocks += 1
            pos += width
        return 3 * full_blocks + min(path_len - pos, 3)

    started = time.monotonic()
    got = tuple(required_assets(23, k, 1) for k in range(0, 11))
    expected = tuple(oracle(23, k) for k in range(0, 11))
    assert got == expected
    assert expected == (23, 15, 11, 9, 7, 6, 6, 6, 6, 5, 3)
    # shape: monotone nonincreasing, saturating at 3Y once one block
    # spans the whole path
    assert all(a >= b for a, b in zip(expected, expected[1:]))
    assert all(required_assets(23, k, 1) == 3 for k in range(10, 16))
    assert time.monotonic() - started < 1.0
    _report("bound-table")


# -- 2. sufficiency bracket -------------------------------------------------------


def test_sufficiency_bracket_over_corpus():
    assert len(CORPUS) >= 50
    started = time.monotonic()
    for inst in CORPUS:
        assert 3 <= inst.path_len <= 9 and 0 <= inst.k <= 2
        assert len(inst.env.graph.nodes) <= 14
        bound = required_units(inst.path_len, inst.k)
        result = verify_sufficiency(inst.env, inst.k, bound)
        assert result.verdict == SAFE_CLOSED, (inst.id, result)
        assert result.inadmissible_starts == ()
    assert time.monotonic() - started < 300
    _report(f"sufficiency-bracket ({len(CORPUS)} instances)")


# -- 3. necessity bracket -----------------------------------------------------------


def test_necessity_bracket_with_replayable_witnesses(tmp_path):
    gadgets = [inst for inst in CORPUS if inst.gadget is not None]
    assert gadgets
    for inst in gadgets:
        bound = required_units(inst.path_len, inst.k)
        trace = tmp_path / f"{inst.id}.jsonl"
        result = verify_necessity(inst.gadget, bound - 1, trace_path=str(trace))
        assert result.verdict == ATTACKER_WINS, inst.id
        assert result.exhaustive, inst.id
        policy = result.policy_outcome
        assert policy is not None and policy.result == ATTACKER_WIN, inst.id
        replayed = replay(str(trace))
        assert replayed.result == ATTACKER_WIN, inst.id
        assert replayed.win_step == policy.win_step, inst.id
        assert replayed.witness == policy.witness, inst.id
    _report(f"necessity-bracket ({len(gadgets)} gadgets)")


# -- 4. invariant suite --------------------------------------------------------------


def test_invariant_suite_random_rollouts():
    rollouts_per_instance = 160  # 160 * 66 instances > 10,000
    total, defender_actions = 0, 0
    for inst in CORPUS:
        bound = required_assets(inst.path_len, inst.k, 1)
        for r in range(rollouts_per_instance):
            cfg = GameConfig(
                env=inst.env,
                k=inst.k,
                defender_total=bound,
                attacker_total=Fraction(1),
                strategy=RandomStrategy(seed=zlib.crc32(f"{inst.id}:{r}".encode())),
                max_steps=12,
                check_invariants=True,  # raises on any advantage/recenter breach
            )
            game = Game(cfg)
            outcome = game.run(allow_splits=True)
            assert outcome.defended, (inst.id, r)
            defender_actions += game.state.t + 1
            total += 1
    assert total >= 10_000
    _report(f"invariant-suite ({total} rollouts, {defender_actions} defender actions)")


# -- 5. fractional generalization ------------------------------------------------------


def test_fractional_split_rollouts_exact_sums():
    rollouts = 0
    split_runs = 0
    for inst in CORPUS:
        if rollouts >= 1_000 and split_runs >= 200:
            break
        bound = required_assets(inst.path_len, inst.k, 1)
        for r in range(16):
            cfg = GameConfig(
                env=inst.env,
                k=inst.k,
                defender_total=bound,
                attacker_total=Fraction(1),
                strategy=RandomStrategy(seed=zlib.crc32(f"{inst.id}:frac:{r}".encode()), split_prob=0.3),
                max_steps=10,
                check_invariants=True,
            )
            game = Game(cfg)
            while game.outcome is None:
                game.defender_phase()
                assert subgame_defender_sum(game) == game.state.defender
                game.attacker_phase()
                assert subgame_defender_sum(game) == game.state.defender
                assert game.state.defender.total == bound
                game.evaluate_phase()
            assert game.outcome.defended, (inst.id, r)
            rollouts += 1
            if len(game.subgames) > 1:
                split_runs += 1
    assert rollouts >= 1_000
    assert split_runs >= 200  # splits actually happened
    _report(f"fractional ({rollouts} rollouts, {split_runs} with splits)")


# -- 6. information hygiene --------------------------------------------------------------


def test_information_hygiene_invisible_perturbations():
    pairs = 0
    rng = random.Random(20240808)
    instances = [inst for inst in CORPUS if inst.kind in ("gadget", "decorated")]
    while pairs < 1_000:
        inst = rng.choice(instances)
        invisible = [
            v for v in inst.env.graph.nodes if inst.env.path_distance(v) > inst.k
        ]
        if len(invisible) < 2:
            continue
        cfg = GameConfig(
            env=inst.env,
            k=inst.k,
            defender_total=required_assets(inst.path_len, inst.k, 1),
            attacker_total=Fraction(1),
            strategy=RandomStrategy(seed=rng.randrange(2**20)),
            max_steps=10,
        )
        game = Game(cfg)
        while game.outcome is None and pairs < 1_000:
            (group,) = game.state.groups
            if group.node in invisible:
                real_plan = game.preview_defender_plan(game.state)
                for other in invisible:
                    if other == group.node:
                        continue
                    perturbed = GameState(
                        t=game.state.t,
                        defender=game.state.defender,
                        attacker=type(game.state.attacker)({other: group.amount}),
                        groups=(AttackerGroup(group.label, other, group.amount),),
                        phase=game.state.phase,
                    )
                    assert game.preview_defender_plan(perturbed) == real_plan
                    pairs += 1
            game.defender_phase()
            game.attacker_phase()
            game.evaluate_phase()
    assert pairs >= 1_000
    _report(f"information-hygiene ({pairs} paired checks)")


# -- 7. scenario goldens --------------------------------------------------------------------


SCENARIO_BEHAVIORS = {
    # name -> (description of captioned behavior, checker over trajectory)
    "tracking.json": lambda traj: traj == [[2], [3], [3], [4], [4]]
    and len(set(map(tuple, traj))) > 1,  # the platoon moves with the threat
    "boundary.json": lambda traj: traj == [[3, 8], [4, 8], [4, 7], [4, 7], [3, 7], [3, 7]]
    and [4, 7] in traj,  # both platoons meet at the shared boundary
    "recenter.json": lambda traj: traj == [[3], [4], [4], [3], [3]]
    and traj[3] == [3],  # recentered one action after the exit
}


@pytest.mark.parametrize("name", sorted(SCENARIO_BEHAVIORS))
def test_scenario_goldens(name, tmp_path, capsys):
    from importlib import resources

    config_path = str(resources.files("ddab.scenarios") / name)
    code = cli_main(["run", "--config", config_path, "--out", str(tmp_path)])
    captured = capsys.readouterr()
    assert code == 0, captured.err
    records = read_trace(str(tmp_path / "trace.jsonl"))
    trajectory = [
        r["platoon_centers"]["A"]
        for r in records
        if r.get("type") == "phase" and r.get("phase") == "defender"
    ]
    assert SCENARIO_BEHAVIORS[name](trajectory), trajectory
    _report(f"scenario-golden {name}")


# -- 8. determinism ----------------------------------------------------------------------------


def _artifact_bytes(out: Path) -> dict[str, bytes]:
    return {
        p.name: p.read_bytes()
        for p in sorted(out.rglob("*"))
        if p.is_file() and p.name != "run_meta.json"
    }


def test_cli_artifacts_deterministic(tmp_path, capsys):
    run_cfg = {
        "environment": {
            "nodes": [f"p{i}" for i in range(1, 6)] + ["xi", "q1"],
            "edges": [[f"p{i}", f"p{i+1}"] for i in range(1, 5)]
            + [["xi", "p2"], ["xi", "p3"], ["xi", "p4"], ["xi", "q1"]],
            "path": [f"p{i}" for i in range(1, 6)],
        },
        "k": 1,
        "X": "3/1",
        "Y": "1/1",
        "strategy": {"kind": "random", "seed": 99, "start": "q1", "split_prob": 0.2},
        "max_steps": 20,
    }
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(run_cfg))
    corpus_path = tmp_path / "corpus.json"
    corpus_path.write_text(json.dumps({"instances": ["gadget-n5-k1", "decorated-n7-k2"]}))

    def run_all(base: Path) -> dict[str, bytes]:
        assert cli_main(["bound-table", "--path-len", "23", "--out", str(base / "table.csv")]) == 0
        assert cli_main([
            "gadget-gen", "--path-len", "7", "--k", "1", "--alpha", "6",
            "--out", str(base / "gadget.json"),
        ]) == 0
        assert cli_main(["run", "--config", str(cfg_path), "--out", str(base / "game")]) == 0
        assert cli_main([
            "verify", "--corpus", str(corpus_path), "--out", str(base / "verify"), "--jobs", "1",
        ]) == 0
        assert cli_main(["replay", "--trace", str(base / "game" / "trace.jsonl")]) == 0
        capsys.readouterr()
        return _artifact_bytes(base)

    first = run_all(tmp_path / "one")
    second = run_all(tmp_path / "two")
    assert first == second
    assert "trace.jsonl" in first and "table.csv" in first
    _report(f"determinism ({len(first)} artifacts byte-identical)")
