"""Engine orchestration: turn order, outcomes, traces, replay, sub-games."""

from __future__ import annotations

import json
from fractions import Fraction

import pytest

from ddab.adversary import (
    GreedyStrategy,
    RandomStrategy,
    ScriptedStrategy,
    gadget_attack_plan,
)
from ddab.engine import (
    ATTACKER_WIN,
    DEFENDED_CYCLE,
    DEFENDED_HORIZON,
    Game,
    GameConfig,
    ProtocolError,
    ReplayCorruptionError,
    replay,
    run_game,
    run_parallel_subgames,
    subgame_defender_sum,
)
from ddab.gadgets import GadgetSpec, build_gadget, chain_environment
from ddab.graph import Environment, Graph, PathSpec
from ddab.policy import required_assets
from ddab.state import Phase


def shadowed_env() -> Environment:
    """Chain p1..p5 with a parallel off-path lane u12..u45 and a hideout w."""
    nodes = [f"p{i}" for i in range(1, 6)] + ["u12", "u23", "u34", "u45", "w"]
    edges = (
        [(f"p{i}", f"p{i+1}") for i in range(1, 5)]
        + [("u12", "p1"), ("u12", "p2"), ("u23", "p2"), ("u23", "p3")]
        + [("u34", "p3"), ("u34", "p4"), ("u45", "p4"), ("u45", "p5")]
        + [("u12", "u23"), ("u23", "u34"), ("u34", "u45"), ("w", "u45")]
    )
    return Environment(Graph(nodes, edges), PathSpec(tuple(f"p{i}" for i in range(1, 6))))


def cfg_for(env, strategy, *, k=1, X=None, Y=1, **kw) -> GameConfig:
    X = X if X is not None else required_assets(len(env.path), k, Y)
    return GameConfig(
        env=env,
        k=k,
        defender_total=X,
        attacker_total=Y,
        strategy=strategy,
        **kw,
    )


def test_idle_attacker_reaches_cycle_after_recentering():
    env = shadowed_env()
    outcome = run_game(cfg_for(env, ScriptedStrategy(start="w", moves=[])))
    assert outcome.result == DEFENDED_CYCLE
    assert outcome.defended


def test_turn_order_in_trace(tmp_path):
    env = shadowed_env()
    trace = tmp_path / "t.jsonl"
    run_game(cfg_for(env, ScriptedStrategy(start="w", moves=[]), trace_path=str(trace)))
    records = [json.loads(line) for line in trace.read_text().splitlines()]
    phases = [r["phase"] for r in records if r["type"] == "phase"]
    for i in range(0, len(phases) - 2, 3):
        assert phases[i : i + 3] == ["defender", "attacker", "evaluate"]
    kinds = [r["type"] for r in records]
    assert kinds[0] == "header" and kinds[1] == "init" and kinds[-1] == "outcome"


def test_platoon_tracks_threat_then_recenters():
    env = shadowed_env()
    script = [[["w", "u45"]], [], [["u45", "w"]], []]
    cfg = cfg_for(env, ScriptedStrategy(start="w", moves=script), check_invariants=True)
    game = Game(cfg)
    centers = [game.subgames[0].platoons.centers[0]]
    while game.outcome is None:
        game.defender_phase()
        centers.append(game.subgames[0].platoons.centers[0])
        game.attacker_phase()
        game.evaluate_phase()
    # init at 3; blind hold; sees u45 -> 4; frontier edge at 0 holds; exit
    # -> recenter to 3 within one action.
    assert centers[:5] == [3, 3, 4, 4, 3]
    assert game.outcome.result == DEFENDED_CYCLE


def test_gadget_attacker_beats_underfunded_defense():
    spec = GadgetSpec(path_len=5, k=1, alpha=4)
    env = build_gadget(spec)
    strategy = gadget_attack_plan(env, 1, 4)
    outcome = run_game(cfg_for(env, strategy, X=2))
    assert outcome.result == ATTACKER_WIN
    assert outcome.witness in {"p3", "p4", "p5"}


def test_gadget_attacker_contained_at_full_bound():
    spec = GadgetSpec(path_len=5, k=1, alpha=4)
    env = build_gadget(spec)
    strategy = gadget_attack_plan(env, 1, 4)
    outcome = run_game(cfg_for(env, strategy, X=3, check_invariants=True))
    assert outcome.defended


def test_greedy_attacker_takes_open_node():
    env = shadowed_env()
    # Two defender units cover at most p3..p4 after reacting; greedy sits
    # next to p5 and walks onto the opening.
    outcome = run_game(cfg_for(env, GreedyStrategy(start="u45"), X=2))
    assert outcome.result == ATTACKER_WIN
    assert outcome.witness == "p5"
    assert outcome.win_step == 0


def test_undominatable_start_is_immediate_win(tmp_path):
    env = chain_environment(5)
    trace = tmp_path / "start.jsonl"
    outcome = run_game(
        cfg_for(env, GreedyStrategy(start="p5"), X=2, trace_path=str(trace))
    )
    assert outcome.result == ATTACKER_WIN and outcome.win_step == 0
    replayed = replay(str(trace))
    assert replayed.result == ATTACKER_WIN and replayed.win_step == 0


def test_random_strategy_replays_bitwise(tmp_path):
    env = shadowed_env()
    t1, t2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for t in (t1, t2):
        outcome = run_game(
            cfg_for(env, RandomStrategy(seed=7, start="w"), max_steps=12, trace_path=str(t))
        )
        assert outcome.result == DEFENDED_HORIZON
    assert t1.read_bytes() == t2.read_bytes()


def test_replay_round_trip(tmp_path):
    env = shadowed_env()
    trace = tmp_path / "run.jsonl"
    script = [[["w", "u45"]], [["u45", "p5"]], [["p5", "p4"]]]
    outcome = run_game(
        cfg_for(env, ScriptedStrategy(start="w", moves=script), trace_path=str(trace))
    )
    replayed = replay(str(trace))
    assert replayed.result == outcome.result
    assert replayed.win_step == outcome.win_step


def test_replay_rejects_tampered_amount(tmp_path):
    env = shadowed_env()
    trace = tmp_path / "run.jsonl"
    run_game(cfg_for(env, ScriptedStrategy(start="w", moves=[[["w", "u45"]]]), trace_path=str(trace)))
    lines = trace.read_text().splitlines()
    for i, line in enumerate(lines):
        record = json.loads(line)
        if record["type"] == "phase" and record["phase"] == "attacker":
            record["flows"][0][2] = "9/10"
            lines[i] = json.dumps(record, sort_keys=True)
            break
    trace.write_text("\n".join(lines) + "\n")
    with pytest.raises(ReplayCorruptionError):
        replay(str(trace))


def test_replay_of_attacker_win_matches_step(tmp_path):
    spec = GadgetSpec(path_len=5, k=1, alpha=4)
    env = build_gadget(spec)
    trace = tmp_path / "win.jsonl"
    outcome = run_game(
        cfg_for(env, gadget_attack_plan(env, 1, 4), X=2, trace_path=str(trace))
    )
    assert outcome.result == ATTACKER_WIN
    replayed = replay(str(trace))
    assert replayed.result == ATTACKER_WIN
    assert replayed.win_step == outcome.win_step
    assert replayed.witness == outcome.witness


def test_split_spawns_parallel_subgames_and_sums_match():
    env = shadowed_env()
    script = [
        [["w", "u45"]],
        [["u45", "u34", "7/10"]],  # split: 7/10 marches on, 3/10 stays
        [["u34", "u23"]],
        [],
    ]
    cfg = cfg_for(env, ScriptedStrategy(start="w", moves=script), check_invariants=True)
    game = Game(cfg)
    while game.outcome is None:
        game.defender_phase()
        assert subgame_defender_sum(game) == game.state.defender
        game.attacker_phase()
        assert subgame_defender_sum(game) == game.state.defender
        game.evaluate_phase()
    assert game.outcome.defended
    labels = {s.label for s in game.subgames}
    assert labels == {"A.0", "A.1"}
    masses = sorted(s.mass for s in game.subgames)
    assert masses == [Fraction(3, 10), Fraction(7, 10)]


def test_run_game_rejects_splits():
    env = shadowed_env()
    script = [[["w", "u45", "1/2"]]]
    with pytest.raises(ProtocolError):
        run_game(cfg_for(env, ScriptedStrategy(start="w", moves=script)))


def test_parallel_run_without_splits_matches_run_game(tmp_path):
    env = shadowed_env()
    script = [[["w", "u45"]], [["u45", "p5"]], []]
    t1, t2 = tmp_path / "mono.jsonl", tmp_path / "par.jsonl"
    o1 = run_game(cfg_for(env, ScriptedStrategy(start="w", moves=list(script)), trace_path=str(t1)))
    o2 = run_parallel_subgames(
        cfg_for(env, ScriptedStrategy(start="w", moves=list(script)), trace_path=str(t2))
    )
    assert (o1.result, o1.win_step) == (o2.result, o2.win_step)
    assert t1.read_bytes() == t2.read_bytes()


def test_default_horizon_formula():
    env = shadowed_env()
    cfg = cfg_for(env, ScriptedStrategy(start="w", moves=[]))
    assert Game(cfg).max_steps == 4 * len(env.graph.nodes) + 64


def test_under_resourced_run_allowed_and_parked_remainder():
    env = shadowed_env()
    cfg = cfg_for(env, ScriptedStrategy(start="w", moves=[]), X=Fraction(7, 2))
    game = Game(cfg)
    # 3 whole units feed the platoon; the odd 1/2 parks on the start node.
    assert game.state.defender.get("p1") == Fraction(1, 2)
    assert game.state.defender.total == Fraction(7, 2)
    game.run(allow_splits=False)
    assert game.state.defender.total == Fraction(7, 2)


def test_split_outside_visible_region_defense_holds():
    env = shadowed_env()
    # Split while invisible at w: 3/10 stays hidden, 7/10 enters later at
    # u45; the defender answers each group as it first appears.
    script = [
        [["w", "u45", "7/10"]],
        [["u45", "p5"]],
        [],
        [],
    ]
    cfg = cfg_for(env, ScriptedStrategy(start="w", moves=script), check_invariants=True)
    game = Game(cfg)
    while game.outcome is None:
        game.defender_phase()
        assert subgame_defender_sum(game) == game.state.defender
        game.attacker_phase()
        game.evaluate_phase()
    assert game.outcome.defended
    assert {s.label for s in game.subgames} == {"A.0", "A.1"}


def test_headline_size_defense_and_replay(tmp_path):
    # |P| = 23, k = 1: the 15-unit defense holds the gadget attack and the
    # trace replays to the same outcome.
    spec = GadgetSpec(path_len=23, k=1, alpha=12)
    env = build_gadget(spec)
    trace = tmp_path / "big.jsonl"
    outcome = run_game(
        cfg_for(env, gadget_attack_plan(env, 1, 12), X=15,
                check_invariants=True, trace_path=str(trace))
    )
    assert outcome.defended
    assert replay(str(trace)).result == outcome.result
