"""Attacker strategies: legality, determinism, and the gadget timeline."""

from __future__ import annotations

from fractions import Fraction

import pytest

from ddab.adversary import (
    GadgetStrategy,
    GreedyStrategy,
    RandomStrategy,
    ScriptedStrategy,
    find_gadget,
    gadget_attack_plan,
    strategy_from_spec,
)
from ddab.engine import Game, GameConfig
from ddab.gadgets import GadgetSpec, build_gadget, chain_environment
from ddab.graph import InputError
from ddab.policy import required_assets
from ddab.state import Flow


def game_for(env, strategy, *, k=1, X=None, Y=1, **kw) -> Game:
    X = X if X is not None else required_assets(len(env.path), k, Y)
    return Game(
        GameConfig(env=env, k=k, defender_total=X, attacker_total=Y, strategy=strategy, **kw)
    )


def test_scripted_stay_when_exhausted():
    env = chain_environment(5)
    strategy = ScriptedStrategy(start="p1", moves=[[["p1", "p2"]]])
    game = game_for(env, strategy)
    game.defender_phase()
    game.attacker_phase()
    assert game.state.groups[0].node == "p2"
    assert strategy.finished
    game.evaluate_phase()
    game.defender_phase()
    game.attacker_phase()
    assert game.state.groups[0].node == "p2"  # stays thereafter


def test_scripted_strategy_from_json_spec():
    env = chain_environment(5)
    strategy = strategy_from_spec({"kind": "scripted", "start": "p5", "moves": []}, env)
    assert isinstance(strategy, ScriptedStrategy)
    with pytest.raises(InputError):
        strategy_from_spec({"kind": "telepathic"}, env)


def test_random_strategy_same_seed_same_moves():
    env = build_gadget(GadgetSpec(path_len=5, k=1, alpha=3))

    def rollout(seed):
        game = game_for(env, RandomStrategy(seed=seed, start="q1"), max_steps=15)
        positions = []
        while game.outcome is None:
            game.defender_phase()
            game.attacker_phase()
            positions.append(tuple(g.node for g in game.state.groups))
            game.evaluate_phase()
        return positions

    assert rollout(11) == rollout(11)
    assert rollout(11) != rollout(12)  # overwhelmingly likely


def test_random_split_amounts_are_exact():
    env = build_gadget(GadgetSpec(path_len=5, k=1, alpha=3))
    strategy = RandomStrategy(seed=3, split_prob=1.0, start="q1")
    game = game_for(env, strategy, max_steps=6)
    game.defender_phase()
    game.attacker_phase()
    amounts = sorted(g.amount for g in game.state.groups)
    assert len(amounts) == 2
    assert sum(amounts, Fraction(0)) == 1
    assert all(a.denominator in (2, 4, 10) for a in amounts)


def test_greedy_never_passes_up_capture():
    env = chain_environment(5)
    strategy = GreedyStrategy(start="p5")
    game = game_for(env, strategy, X=3)
    game.defender_phase()
    # p5 currently holds one defender unit (tie: no capture); p4 too.
    # Force the check across several turns: greedy only ever moves onto a
    # path node when that node is strictly under-defended.
    for _ in range(4):
        if game.outcome is not None:
            break
        moves = strategy.moves(game.state, env)
        ((label, flows),) = moves.items()
        dst = flows[0].dst
        if dst in env.path and dst != game.state.groups[0].node:
            assert game.state.defender.get(dst) < game.state.groups[0].amount
        game.attacker_phase(moves)
        game.evaluate_phase()
        if game.outcome is None:
            game.defender_phase()


def test_find_gadget_shapes():
    env = build_gadget(GadgetSpec(path_len=7, k=2, alpha=4))
    layout = find_gadget(env, 2, 4)
    assert layout.xi == "xi"
    assert layout.targets == ("p3", "p4", "p5")
    assert layout.approach[-1] == "xi"
    assert len(layout.approach) == 3  # staging q2 -> q1 -> xi
    assert env.path_distance(layout.approach[0]) == 3  # just outside U_2


def test_find_gadget_missing_structure():
    env = chain_environment(5)
    with pytest.raises(InputError):
        gadget_attack_plan(env, 1, 3)


def test_gadget_timeline_detection_to_strike():
    # k=1: detected when stepping to xi, strikes on the next attacker turn.
    env = build_gadget(GadgetSpec(path_len=5, k=1, alpha=2))
    strategy = gadget_attack_plan(env, 1, 2)
    game = game_for(env, strategy, X=2)  # under-resourced: strike lands
    game.defender_phase()
    game.attacker_phase()
    assert game.state.groups[0].node == "xi"
    game.evaluate_phase()
    game.defender_phase()
    game.attacker_phase()
    assert game.state.groups[0].node in {"p1", "p2", "p3"}
    game.evaluate_phase()
    assert game.outcome is not None
    assert game.outcome.result == "ATTACKER_WIN"
    assert game.outcome.win_step == 1


def test_gadget_reports_defended_when_covered():
    env = build_gadget(GadgetSpec(path_len=5, k=1, alpha=2))
    strategy = gadget_attack_plan(env, 1, 2)
    game = game_for(env, strategy, X=3)
    outcome = game.run(allow_splits=False)
    assert outcome.defended
    assert strategy.defended and strategy.finished


def test_k0_gadget_strikes_immediately():
    env = build_gadget(GadgetSpec(path_len=3, k=0, alpha=2))
    strategy = gadget_attack_plan(env, 0, 2)
    game = game_for(env, strategy, k=0, X=2)
    game.defender_phase()
    game.attacker_phase()
    assert game.state.groups[0].node in {"p1", "p2", "p3"}
    game.evaluate_phase()
    assert game.outcome.result == "ATTACKER_WIN"
    assert game.outcome.win_step == 0


def test_next_attacker_move_wraps_group_flows():
    from ddab.adversary import next_attacker_move

    env = chain_environment(5)
    strategy = ScriptedStrategy(start="p5", moves=[[["p5", "p4"]]])
    game = game_for(env, strategy)
    game.defender_phase()
    plan = next_attacker_move(ScriptedStrategy(start="p5", moves=[[["p5", "p4"]]]), game.state, env)
    assert plan.group_flows is not None
    assert plan.flows[0] == Flow("p5", "p4", Fraction(1))
