"""Attacker strategy suite.

Strategies see the complete game state (the mover order is Stackelberg
within a timestep: the attacker watches the defender move before
choosing). Each strategy owns its cursor/RNG, so one instance drives one
game. Moves come back per labeled group so the group ledger stays exact.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from ddab.graph import Environment, InputError
from ddab.state import AttackerGroup, Flow, GameState, rational

# Exact split shares used by the random strategy; small denominators keep
# amounts readable in traces.
SPLIT_MENU = (
    Fraction(1, 2),
    Fraction(3, 10),
    Fraction(7, 10),
    Fraction(1, 4),
    Fraction(3, 4),
)

ROOT_LABEL = "A"


class AttackerStrategy:
    """Interface: initial placement plus one move per attacker phase."""

    deterministic = True

    def initial_groups(self, env: Environment, total: Fraction) -> list[AttackerGroup]:
        raise NotImplementedError

    def moves(self, state: GameState, env: Environment) -> dict[str, list[Flow]]:
        """Per-group flows for the current attacker phase."""
        raise NotImplementedError

    def cursor_key(self):
        """Hashable strategy-internal state, folded into cycle detection."""
        return None

    @property
    def finished(self) -> bool:
        """True once the strategy has nothing left but staying put."""
        return False


def _stay_all(state: GameState) -> dict[str, list[Flow]]:
    return {
        g.label: [Flow(g.node, g.node, g.amount)] for g in state.groups
    }


class ScriptedStrategy(AttackerStrategy):
    """Replays a fixed move list; stays forever once exhausted.

    Script entries are per-turn lists of [src, dst] hops (or [src, dst,
    amount] for splits). Hops apply to whichever group currently sits on
    `src`; unscripted groups stay.
    """

    def __init__(self, start: str | dict[str, str], moves: list):
        # start: single node, or {label: node} for multi-group starts
        self.start = start
        self.script = list(moves)
        self.turn = 0

    @classmethod
    def from_json(cls, data: dict) -> "ScriptedStrategy":
        return cls(start=data["start"], moves=data.get("moves", []))

    def initial_groups(self, env: Environment, total: Fraction) -> list[AttackerGroup]:
        if isinstance(self.start, str):
            if self.start not in env.graph:
                raise InputError(f"scripted start node {self.start!r} unknown")
            return [AttackerGroup(ROOT_LABEL, self.start, total)]
        groups = []
        share = total / len(self.start)
        for i, (label, node) in enumerate(sorted(self.start.items())):
            groups.append(AttackerGroup(label, node, share))
        return groups

    @property
    def finished(self) -> bool:
        return self.turn >= len(self.script)

    def cursor_key(self):
        return min(self.turn, len(self.script))

    def moves(self, state: GameState, env: Environment) -> dict[str, list[Flow]]:
        plan = _stay_all(state)
        if self.finished:
            return plan
        hops = self.script[self.turn]
        self.turn += 1
        by_node = {g.node: g for g in state.groups}
        for hop in hops:
            src, dst = hop[0], hop[1]
            group = by_node.get(src)
            if group is None:
                raise InputError(f"scripted hop from {src!r} but no group is there")
            if len(hop) > 2:
                part = rational(hop[2])
                keep = group.amount - part
                if part <= 0 or keep <= 0:
                    raise InputError(f"scripted split {hop} must leave both sides positive")
                plan[group.label] = [Flow(src, dst, part), Flow(src, src, keep)]
            else:
                plan[group.label] = [Flow(src, dst, group.amount)]
        return plan


class RandomStrategy(AttackerStrategy):
    """Seeded random walk; optional exact-rational splits.

    Each group moves whole to a uniformly random neighbor (or stays).
    With probability `split_prob` a group instead splits between two
    distinct destinations using a share from the fixed menu.
    """

    deterministic = False

    def __init__(self, seed: int, split_prob: float = 0.0, start: str | None = None):
        self.rng = random.Random(seed)
        self.seed = seed
        self.split_prob = split_prob
        self.start = start
        self._draws = 0

    def initial_groups(self, env: Environment, total: Fraction) -> list[AttackerGroup]:
        node = self.start or self.rng.choice(list(env.graph.nodes))
        if node not in env.graph:
            raise InputError(f"random start node {node!r} unknown")
        self._draws += 1
        return [AttackerGroup(ROOT_LABEL, node, total)]

    def cursor_key(self):
        return self._draws

    def moves(self, state: GameState, env: Environment) -> dict[str, list[Flow]]:
        plan: dict[str, list[Flow]] = {}
        for g in state.groups:
            options = sorted(env.graph.neighbors(g.node)) + [g.node]
            self._draws += 1
            if len(options) > 1 and self.rng.random() < self.split_prob:
                share = self.rng.choice(SPLIT_MENU)
                a, b = self.rng.sample(options, 2)
                first, second = g.amount * share, g.amount * (1 - share)
                plan[g.label] = [Flow(g.node, a, first), Flow(g.node, b, second)]
            else:
                dst = self.rng.choice(options)
                plan[g.label] = [Flow(g.node, dst, g.amount)]
        return plan


class GreedyStrategy(AttackerStrategy):
    """Never passes up an immediate capture; otherwise stalks the path.

    If a group can step onto (or sits next to) a path node holding less
    defense than the group's mass, it takes the first such node in path
    order. Otherwise it walks one hop along a shortest route toward the
    nearest path node, preferring to hover just off the path.
    """

    def __init__(self, start: str):
        self.start = start

    def initial_groups(self, env: Environment, total: Fraction) -> list[AttackerGroup]:
        if self.start not in env.graph:
            raise InputError(f"greedy start node {self.start!r} unknown")
        return [AttackerGroup(ROOT_LABEL, self.start, total)]

    def moves(self, state: GameState, env: Environment) -> dict[str, list[Flow]]:
        plan: dict[str, list[Flow]] = {}
        for g in state.groups:
            reachable = sorted(env.graph.neighbors(g.node)) + [g.node]
            capture = [
                v
                for v in reachable
                if v in env.path and state.defender.get(v) < g.amount
            ]
            if capture:
                target = min(capture, key=env.path.position)
                plan[g.label] = [Flow(g.node, target, g.amount)]
                continue
            if env.path_distance(g.node) <= 1:
                plan[g.label] = [Flow(g.node, g.node, g.amount)]
                continue
            step = min(
                sorted(env.graph.neighbors(g.node)), key=lambda v: env.path_distance(v)
            )
            plan[g.label] = [Flow(g.node, step, g.amount)]
        return plan


@dataclass(frozen=True)
class GadgetLayout:
    """The capture gadget inside an environment: an off-path node `xi`
    adjacent to three consecutive path nodes, reachable from a staging
    node just outside the visible region through an approach chain."""

    alpha: int  # path position of the middle target
    xi: str
    targets: tuple[str, str, str]
    approach: tuple[str, ...]  # staging node first, xi last


def find_gadget(env: Environment, k: int, alpha: int) -> GadgetLayout:
    """Locate the gadget for target center `alpha`, or raise."""
    path = env.path
    if not 2 <= alpha <= len(path) - 1:
        raise InputError(f"gadget center must be interior, got {alpha}")
    targets = (path.node_at(alpha - 1), path.node_at(alpha), path.node_at(alpha + 1))
    xi = None
    for v in env.graph.nodes:
        if v in path:
            continue
        if all(env.graph.has_edge(v, t) for t in targets):
            xi = v
            break
    if xi is None:
        raise InputError(f"no off-path node adjacent to all of {targets}")
    # March inward from the farthest invisible node that can reach xi in
    # exactly (its path distance - 1) hops: the minimal-invisibility chain.
    dist_to_xi = env.graph.distances_from(xi)
    staging = [
        v
        for v, d in dist_to_xi.items()
        if env.path_distance(v) == k + 1 and d == k and v not in path
    ]
    if k == 0:
        approach: tuple[str, ...] = (xi,)
    else:
        if not staging:
            raise InputError(
                f"no staging node at path distance {k + 1} reaching {xi!r} in {k} hops"
            )
        start = min(staging)
        chain = [start]
        current = start
        while current != xi:
            current = min(
                (
                    w
                    for w in env.graph.neighbors(current)
                    if dist_to_xi[w] == dist_to_xi[chain[-1]] - 1
                ),
            )
            chain.append(current)
        approach = tuple(chain)
    return GadgetLayout(alpha=alpha, xi=xi, targets=targets, approach=approach)


class GadgetStrategy(AttackerStrategy):
    """The worst-case attacker: wait invisible, dash to the gadget, strike.

    Staging sits at path distance k+1, so the first inward hop is the
    first detectable position; the dash reaches the gadget node after k
    observed defender actions, and the strike picks whichever target is
    under-defended at that moment. If all three targets are covered the
    strike is impossible and the strategy reports itself defended.
    """

    def __init__(self, layout: GadgetLayout):
        self.layout = layout
        self.step_index = 0
        self.defended = False

    def initial_groups(self, env: Environment, total: Fraction) -> list[AttackerGroup]:
        return [AttackerGroup(ROOT_LABEL, self.layout.approach[0], total)]

    @property
    def finished(self) -> bool:
        return self.defended

    def cursor_key(self):
        return (self.step_index, self.defended)

    def moves(self, state: GameState, env: Environment) -> dict[str, list[Flow]]:
        (group,) = state.groups
        route = self.layout.approach
        if self.step_index < len(route) - 1:
            self.step_index += 1
            return {group.label: [Flow(group.node, route[self.step_index], group.amount)]}
        if group.node == self.layout.xi and not self.defended:
            open_targets = [
                t for t in self.layout.targets if state.defender.get(t) < group.amount
            ]
            if open_targets:
                target = min(open_targets, key=env.path.position)
                return {group.label: [Flow(group.node, target, group.amount)]}
            self.defended = True
        return _stay_all(state)


def gadget_attack_plan(env: Environment, k: int, alpha: int) -> GadgetStrategy:
    """Build the scripted gadget attacker for an environment, validating
    that the gadget structure actually exists there."""
    return GadgetStrategy(find_gadget(env, k, alpha))


class ExternalStrategy(AttackerStrategy):
    """Moves are pushed in from outside (the play server's human)."""

    deterministic = False

    def __init__(self, start: str):
        self.start = start
        self.pending: dict[str, list[Flow]] | None = None

    def initial_groups(self, env: Environment, total: Fraction) -> list[AttackerGroup]:
        if self.start not in env.graph:
            raise InputError(f"external start node {self.start!r} unknown")
        return [AttackerGroup(ROOT_LABEL, self.start, total)]

    def submit(self, group_flows: dict[str, list[Flow]]) -> None:
        self.pending = group_flows

    def moves(self, state: GameState, env: Environment) -> dict[str, list[Flow]]:
        if self.pending is None:
            raise InputError("no external move submitted")
        flows, self.pending = self.pending, None
        return flows


def next_attacker_move(strategy: AttackerStrategy, state: GameState, env: Environment):
    """One attacker action as a full move plan (per-group flows attached)."""
    from ddab.state import MovePlan

    return MovePlan.from_group_flows(strategy.moves(state, env))


def strategy_from_spec(spec: dict, env: Environment) -> AttackerStrategy:
    """Build a strategy from its JSON run-config description."""
    kind = spec.get("kind")
    if kind == "scripted":
        return ScriptedStrategy.from_json(spec)
    if kind == "random":
        return RandomStrategy(
            seed=int(spec.get("seed", 0)),
            split_prob=float(spec.get("split_prob", 0.0)),
            start=spec.get("start"),
        )
    if kind == "greedy":
        return GreedyStrategy(start=spec["start"])
    if kind == "gadget":
        return gadget_attack_plan(env, int(spec["k"]), int(spec["alpha"]))
    if kind == "external":
        return ExternalStrategy(start=spec["start"])
    raise InputError(f"unknown attacker strategy kind: {kind!r}")
