"""Game state: asset distributions, legal moves, observations, safety.

All asset amounts are exact rationals. The safety predicate is a hard
weak inequality (ties favor the defender), and proportional splits
produce fractions like 7/10 that must compare exactly at the boundary,
so floating point is never allowed near an amount.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple

from ddab.graph import Environment, PathSpec


class IllegalMoveError(ValueError):
    """A move plan violates edge or conservation constraints."""


class ProtocolError(RuntimeError):
    """An action arrived out of turn order."""


def rational(value) -> Fraction:
    """Parse an exact amount; accepts Fraction, int, or 'num/den' strings."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise IllegalMoveError(f"not an exact amount: {value!r}")


def rational_str(value: Fraction) -> str:
    """Serialize as 'num/den', bit-exact round trip."""
    return f"{value.numerator}/{value.denominator}"


class AssetDistribution:
    """Nonnegative per-node amounts for one player, conserved total."""

    __slots__ = ("amounts", "total")

    def __init__(self, amounts: Mapping[str, Fraction]):
        clean = {v: a for v, a in amounts.items() if a != 0}
        for v, a in clean.items():
            if a < 0:
                raise IllegalMoveError(f"negative amount {a} at {v!r}")
        self.amounts: dict[str, Fraction] = clean
        self.total: Fraction = sum(clean.values(), Fraction(0))

    def get(self, node: str) -> Fraction:
        return self.amounts.get(node, Fraction(0))

    def __eq__(self, other) -> bool:
        return isinstance(other, AssetDistribution) and self.amounts == other.amounts

    def __repr__(self) -> str:
        inner = ", ".join(f"{v}: {a}" for v, a in sorted(self.amounts.items()))
        return f"AssetDistribution({{{inner}}})"

    def to_wire(self) -> dict[str, str]:
        return {v: rational_str(a) for v, a in sorted(self.amounts.items())}

    @classmethod
    def from_wire(cls, data: Mapping[str, str]) -> "AssetDistribution":
        return cls({v: rational(a) for v, a in data.items()})


class Flow(NamedTuple):
    src: str
    dst: str
    amount: Fraction


def _canonical_flows(flows: Iterable[Flow]) -> tuple[Flow, ...]:
    merged: dict[tuple[str, str], Fraction] = {}
    for f in flows:
        amt = rational(f.amount)
        if amt <= 0:
            raise IllegalMoveError(f"flow amount must be positive: {f}")
        key = (f.src, f.dst)
        merged[key] = merged.get(key, Fraction(0)) + amt
    return tuple(Flow(s, d, a) for (s, d), a in sorted(merged.items()))


@dataclass(frozen=True)
class MovePlan:
    """One player's full move: every unit gets a destination.

    `flows` is the aggregate, column-stochastic view validated against the
    mover's distribution. Attacker plans may carry `group_flows`, the same
    flows broken down per labeled attacker group, which keeps the group
    ledger exact when groups share a node.
    """

    flows: tuple[Flow, ...]
    group_flows: tuple[tuple[str, tuple[Flow, ...]], ...] | None = None

    @classmethod
    def stay(cls, dist: AssetDistribution) -> "MovePlan":
        return cls(flows=tuple(Flow(v, v, a) for v, a in sorted(dist.amounts.items())))

    @classmethod
    def from_flows(cls, flows: Iterable[Flow]) -> "MovePlan":
        return cls(flows=_canonical_flows(flows))

    @classmethod
    def from_group_flows(cls, group_flows: Mapping[str, Iterable[Flow]]) -> "MovePlan":
        per_group = tuple(
            (label, _canonical_flows(fl)) for label, fl in sorted(group_flows.items())
        )
        agg: list[Flow] = []
        for _, fl in per_group:
            agg.extend(fl)
        return cls(flows=_canonical_flows(agg), group_flows=per_group)

    def to_wire(self) -> list[list[str]]:
        return [[f.src, f.dst, rational_str(f.amount)] for f in self.flows]


class Phase(enum.Enum):
    DEFENDER = "defender"
    ATTACKER = "attacker"
    EVALUATE = "evaluate"


class AttackerGroup(NamedTuple):
    """A labeled point mass of attacker assets.

    Labels are hierarchical: a split of "A" yields "A.0", "A.1", ... in
    destination order, so the defender's parallel response binds sub-forces
    to groups deterministically. Groups that meet at a node never merge.
    """

    label: str
    node: str
    amount: Fraction


@dataclass(frozen=True)
class GameState:
    t: int
    defender: AssetDistribution
    attacker: AssetDistribution
    groups: tuple[AttackerGroup, ...]
    phase: Phase = Phase.DEFENDER

    def __post_init__(self):
        by_node: dict[str, Fraction] = {}
        for g in self.groups:
            by_node[g.node] = by_node.get(g.node, Fraction(0)) + g.amount
        if by_node != self.attacker.amounts:
            raise IllegalMoveError("attacker group ledger out of sync with amounts")


@dataclass(frozen=True)
class Observation:
    """The defender's view: attacker amounts restricted to the visible region."""

    visible_attacker: dict[str, Fraction]
    unobserved_mass: Fraction
    total: Fraction

    @property
    def single_node(self) -> str | None:
        """The observed node when the observation is one point group."""
        if len(self.visible_attacker) == 1 and self.unobserved_mass == 0:
            return next(iter(self.visible_attacker))
        return None


def observe(state: GameState, region) -> Observation:
    """Restrict the attacker state to a visible region.

    `region` is a VisibilityRegion (anything supporting `in`); amounts on
    member nodes are reported verbatim, the rest melt into one
    unobserved-mass figure.
    """
    visible = {v: a for v, a in state.attacker.amounts.items() if v in region}
    seen = sum(visible.values(), Fraction(0))
    return Observation(
        visible_attacker=visible,
        unobserved_mass=state.attacker.total - seen,
        total=state.attacker.total,
    )


def observe_group(group: AttackerGroup, env: Environment, k: int) -> Observation:
    """Single-group view: the group's node if visible, else nothing."""
    if env.path_distance(group.node) <= k:
        return Observation(
            visible_attacker={group.node: group.amount},
            unobserved_mass=Fraction(0),
            total=group.amount,
        )
    return Observation(
        visible_attacker={}, unobserved_mass=group.amount, total=group.amount
    )


def is_safe(state: GameState, path: PathSpec) -> bool:
    """Defender holds every path node (weak inequality: ties are safe)."""
    return all(
        state.defender.get(p) >= state.attacker.get(p) for p in path.ordered_nodes
    )


def breached_nodes(state: GameState, path: PathSpec) -> list[str]:
    return [
        p for p in path.ordered_nodes if state.attacker.get(p) > state.defender.get(p)
    ]


def _validate_flows(
    env: Environment, dist: AssetDistribution, flows: tuple[Flow, ...]
) -> dict[str, Fraction]:
    """Check edge legality and exact conservation; return the new amounts."""
    outflow: dict[str, Fraction] = {}
    inflow: dict[str, Fraction] = {}
    for f in flows:
        if f.src not in env.graph or f.dst not in env.graph:
            raise IllegalMoveError(f"flow touches unknown node: {f}")
        if f.src != f.dst and not env.graph.has_edge(f.src, f.dst):
            raise IllegalMoveError(f"flow along a non-edge: {f.src!r}->{f.dst!r}")
        outflow[f.src] = outflow.get(f.src, Fraction(0)) + f.amount
        inflow[f.dst] = inflow.get(f.dst, Fraction(0)) + f.amount
    if outflow != dist.amounts:
        raise IllegalMoveError(
            "plan does not assign every unit exactly once: "
            f"outflows {outflow} vs held {dist.amounts}"
        )
    return inflow


def _split_groups(
    groups: tuple[AttackerGroup, ...], plan: MovePlan
) -> tuple[AttackerGroup, ...]:
    """Advance the group ledger through an attacker move.

    With per-group flows each group follows its own flows, splitting into
    numbered children when destinations diverge. Raw plans fall back to a
    deterministic greedy decomposition: per node, groups in label order
    drain flows in destination order.
    """
    if plan.group_flows is not None:
        flows_by_label = dict(plan.group_flows)
        if set(flows_by_label) != {g.label for g in groups}:
            raise IllegalMoveError(
                f"group flows {sorted(flows_by_label)} do not match "
                f"ledger {sorted(g.label for g in groups)}"
            )
        new_groups: list[AttackerGroup] = []
        for g in sorted(groups, key=lambda g: g.label):
            fl = flows_by_label[g.label]
            total = sum((f.amount for f in fl), Fraction(0))
            if total != g.amount or any(f.src != g.node for f in fl):
                raise IllegalMoveError(
                    f"flows for group {g.label!r} must move its whole mass "
                    f"{g.amount} from {g.node!r}"
                )
            if len(fl) == 1:
                new_groups.append(AttackerGroup(g.label, fl[0].dst, g.amount))
            else:
                for i, f in enumerate(sorted(fl, key=lambda f: f.dst)):
                    new_groups.append(AttackerGroup(f"{g.label}.{i}", f.dst, f.amount))
        return tuple(new_groups)

    # Greedy decomposition of unlabeled flows.
    flows_by_src: dict[str, list[Flow]] = {}
    for f in plan.flows:
        flows_by_src.setdefault(f.src, []).append(f)
    remaining = {
        src: [[f.dst, f.amount] for f in sorted(fl, key=lambda f: f.dst)]
        for src, fl in flows_by_src.items()
    }
    new_groups = []
    for g in sorted(groups, key=lambda g: g.label):
        need = g.amount
        parts: list[tuple[str, Fraction]] = []
        for slot in remaining.get(g.node, []):
            if need == 0:
                break
            take = min(need, slot[1])
            if take > 0:
                parts.append((slot[0], take))
                slot[1] -= take
                need -= take
        if need != 0:
            raise IllegalMoveError(
                f"flows from {g.node!r} cannot cover group {g.label!r}"
            )
        if len(parts) == 1:
            new_groups.append(AttackerGroup(g.label, parts[0][0], g.amount))
        else:
            for i, (dst, amt) in enumerate(parts):
                new_groups.append(AttackerGroup(f"{g.label}.{i}", dst, amt))
    return tuple(new_groups)


def apply_move(
    env: Environment, state: GameState, mover: Phase, plan: MovePlan
) -> GameState:
    """Apply one player's move and advance the phase."""
    if mover not in (Phase.DEFENDER, Phase.ATTACKER):
        raise ProtocolError(f"not a mover: {mover}")
    if state.phase is not mover:
        raise ProtocolError(f"phase is {state.phase.value}, not {mover.value}")
    if mover is Phase.DEFENDER:
        inflow = _validate_flows(env, state.defender, plan.flows)
        return GameState(
            t=state.t,
            defender=AssetDistribution(inflow),
            attacker=state.attacker,
            groups=state.groups,
            phase=Phase.ATTACKER,
        )
    inflow = _validate_flows(env, state.attacker, plan.flows)
    return GameState(
        t=state.t,
        defender=state.defender,
        attacker=AssetDistribution(inflow),
        groups=_split_groups(state.groups, plan),
        phase=Phase.EVALUATE,
    )


def advance_timestep(state: GameState) -> GameState:
    """Leave the evaluate phase and start timestep t+1."""
    if state.phase is not Phase.EVALUATE:
        raise ProtocolError(f"cannot advance from phase {state.phase.value}")
    return GameState(
        t=state.t + 1,
        defender=state.defender,
        attacker=state.attacker,
        groups=state.groups,
        phase=Phase.DEFENDER,
    )
