"""Turn orchestration, parallel sub-games, trace emission, and replay.

Every timestep runs defender move -> attacker move -> evaluation, with
the defender seeing only the visible region and the attacker seeing
everything. Fractional attackers are handled as parallel sub-games: each
labeled attacker group is shadowed by its own scaled copy of the platoon
force, and safety is always evaluated on the summed distributions.

Small remainder partitions are defended by static whole units that never
move and never split; they hold one full attacker-total of defense per
node, so no group can take them regardless of how mass is divided.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path as FsPath

from ddab.adversary import AttackerStrategy, next_attacker_move
from ddab.graph import Environment, environment_from_dict, environment_to_dict, node_index_table
from ddab.policy import (
    PartitionScheme,
    PlatoonState,
    build_partitions,
    compute_advantages,
    defender_step,
    greedy_unit_fill,
    initial_platoons,
    placement_units,
)
from ddab.state import (
    AssetDistribution,
    AttackerGroup,
    Flow,
    GameState,
    IllegalMoveError,
    MovePlan,
    Observation,
    Phase,
    ProtocolError,
    advance_timestep,
    apply_move,
    breached_nodes,
    is_safe,
    observe_group,
    rational,
    rational_str,
)

DEFENDED_HORIZON = "DEFENDED_HORIZON"
DEFENDED_CYCLE = "DEFENDED_CYCLE"
ATTACKER_WIN = "ATTACKER_WIN"


class InvariantViolation(AssertionError):
    """A guaranteed property of the defense failed during a run."""


class ReplayCorruptionError(ValueError):
    def __init__(self, step: int, message: str):
        super().__init__(f"trace diverges at record {step}: {message}")
        self.step = step


def default_max_steps(env: Environment) -> int:
    return 4 * len(env.graph.nodes) + 64


@dataclass
class GameConfig:
    env: Environment
    k: int
    defender_total: Fraction
    attacker_total: Fraction
    strategy: AttackerStrategy
    max_steps: int | None = None
    trace_path: str | None = None
    trace_advantages: bool = False
    check_invariants: bool = False

    def __post_init__(self):
        self.defender_total = rational(self.defender_total)
        self.attacker_total = rational(self.attacker_total)
        if self.defender_total <= 0 or self.attacker_total <= 0:
            raise IllegalMoveError("totals must be positive")
        if self.max_steps is not None and self.max_steps < 1:
            raise IllegalMoveError("max_steps must be >= 1")


@dataclass
class GameOutcome:
    result: str
    steps: int
    win_step: int | None = None
    witness: str | None = None
    trace_path: str | None = None

    @property
    def defended(self) -> bool:
        return self.result != ATTACKER_WIN


@dataclass
class _SubGame:
    label: str
    mass: Fraction
    platoons: PlatoonState
    was_visible: bool = False


class TraceWriter:
    def __init__(self, path: str | None):
        self.path = path
        self.records: list[dict] = []

    def write(self, record: dict) -> None:
        self.records.append(record)

    def flush(self) -> None:
        if self.path is None:
            return
        out = FsPath(self.path)
        out.parent.mkdir(parents=True, exist_ok=True)
        with out.open("w") as fh:
            for record in self.records:
                fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_trace(path: str) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


class Game:
    """One live game, stepped phase by phase.

    The run_* helpers drive this loop with a strategy; the play server
    drives it directly with human moves.
    """

    def __init__(self, cfg: GameConfig):
        self.cfg = cfg
        self.env = cfg.env
        self.k = cfg.k
        self.scheme: PartitionScheme = build_partitions(self.env.path, cfg.k)
        self.max_steps = cfg.max_steps or default_max_steps(self.env)
        self.trace = TraceWriter(cfg.trace_path)
        self.outcome: GameOutcome | None = None
        self._seen_states: set = set()

        groups = tuple(cfg.strategy.initial_groups(self.env, cfg.attacker_total))
        if sum((g.amount for g in groups), Fraction(0)) != cfg.attacker_total:
            raise IllegalMoveError("strategy initial groups do not sum to Y")

        # Whole defender units are sized at one attacker-total each.
        unit_budget = int(cfg.defender_total / cfg.attacker_total)
        fill = greedy_unit_fill(self.scheme, unit_budget)
        platoon_fill = tuple(
            0 if part.small else count
            for part, count in zip(self.scheme.partitions, fill)
        )
        static_counts = {
            i: 1
            for part, count in zip(self.scheme.partitions, fill)
            if part.small
            for i in list(part.indices())[:count]
        }
        self.static_amounts: dict[str, Fraction] = {
            self.env.path.node_at(i): cfg.attacker_total for i in static_counts
        }
        spent = (sum(platoon_fill) + len(static_counts)) * cfg.attacker_total
        parked = cfg.defender_total - spent
        if parked < 0:
            raise IllegalMoveError("defender allocation exceeded its total")
        if parked > 0:
            anchor = self.env.path.start
            self.static_amounts[anchor] = self.static_amounts.get(anchor, Fraction(0)) + parked

        self.subgames: list[_SubGame] = []
        for g in sorted(groups, key=lambda g: g.label):
            obs0 = observe_group(g, self.env, self.k)
            platoons = initial_platoons(
                self.env,
                self.scheme,
                obs0,
                units=platoon_fill,
            )
            self.subgames.append(
                _SubGame(
                    label=g.label,
                    mass=g.amount,
                    platoons=platoons,
                    was_visible=obs0.unobserved_mass == 0,
                )
            )

        defender = self._assemble_defender()
        attacker = AssetDistribution(
            {g.node: sum((h.amount for h in groups if h.node == g.node), Fraction(0)) for g in groups}
        )
        self.state = GameState(
            t=0, defender=defender, attacker=attacker, groups=groups, phase=Phase.DEFENDER
        )
        self.trace.write(
            {
                "type": "header",
                **environment_to_dict(self.env),
                "node_index": node_index_table(self.env.graph),
                "k": self.k,
                "X": rational_str(cfg.defender_total),
                "Y": rational_str(cfg.attacker_total),
                "max_steps": self.max_steps,
            }
        )
        self.trace.write(
            {
                "type": "init",
                "t": 0,
                "defender_amounts": self.state.defender.to_wire(),
                "attacker_amounts": self.state.attacker.to_wire(),
                "groups": [[g.label, g.node, rational_str(g.amount)] for g in groups],
                "platoon_centers": self._centers_wire(),
            }
        )
        if not is_safe(self.state, self.env.path):
            # The chosen start cannot be dominated (only possible when the
            # defender is under-resourced): the defense is infeasible.
            self._finish(
                ATTACKER_WIN,
                win_step=0,
                witness=breached_nodes(self.state, self.env.path)[0],
            )

    # -- assembly helpers --------------------------------------------------

    def _assemble_defender(self) -> AssetDistribution:
        amounts: dict[str, Fraction] = dict(self.static_amounts)
        for sub in self.subgames:
            for i, count in placement_units(self.scheme, sub.platoons).items():
                node = self.env.path.node_at(i)
                amounts[node] = amounts.get(node, Fraction(0)) + count * sub.mass
        return AssetDistribution(amounts)

    def _centers_wire(self) -> dict[str, list[int | None]]:
        return {sub.label: list(sub.platoons.centers) for sub in self.subgames}

    def _group(self, label: str) -> AttackerGroup:
        for g in self.state.groups:
            if g.label == label:
                return g
        raise ProtocolError(f"no attacker group labeled {label!r}")

    # -- phases -------------------------------------------------------------

    def _defender_decisions(self, state: GameState):
        """Pure computation of the defender's next move for a state.

        The emitted plan is a function of the sub-game platoon states and
        the per-group observations only; attacker positions outside the
        visible region cannot influence it by construction.
        """
        flows: list[Flow] = [
            Flow(v, v, a) for v, a in sorted(self.static_amounts.items())
        ]
        decisions: list[tuple[_SubGame, Observation, bool, PlatoonState]] = []
        by_label = {g.label: g for g in state.groups}
        for sub in self.subgames:
            group = by_label.get(sub.label)
            if group is None:
                raise ProtocolError(f"no attacker group labeled {sub.label!r}")
            obs = observe_group(group, self.env, self.k)
            exited = sub.was_visible and obs.unobserved_mass != 0
            new_platoons, sub_flows = defender_step(
                self.env, self.scheme, sub.platoons, obs, unit=sub.mass
            )
            flows.extend(sub_flows)
            decisions.append((sub, obs, exited, new_platoons))
        return flows, decisions

    def preview_defender_plan(self, state: GameState) -> MovePlan:
        """The move the defender would make from `state`, uncommitted."""
        flows, _ = self._defender_decisions(state)
        return MovePlan.from_flows(flows)

    def defender_phase(self) -> MovePlan:
        if self.state.phase is not Phase.DEFENDER:
            raise ProtocolError(f"phase is {self.state.phase.value}")
        flows, decisions = self._defender_decisions(self.state)
        observations = []
        for sub, obs, exited, new_platoons in decisions:
            sub.platoons = new_platoons
            sub.was_visible = obs.unobserved_mass == 0
            observations.append((sub, obs, exited))
        plan = MovePlan.from_flows(flows)
        self.state = apply_move(self.env, self.state, Phase.DEFENDER, plan)
        if self.cfg.check_invariants:
            self._check_post_defender(observations)
        self.trace.write(
            {
                "type": "phase",
                "t": self.state.t,
                "phase": "defender",
                "mover": "defender",
                "flows": plan.to_wire(),
                "defender_amounts": self.state.defender.to_wire(),
                "attacker_amounts": self.state.attacker.to_wire(),
                "platoon_centers": self._centers_wire(),
            }
        )
        if self.cfg.trace_advantages:
            for sub in self.subgames:
                obs = observe_group(self._group(sub.label), self.env, self.k)
                report = compute_advantages(self.env, self.scheme, sub.platoons, obs)
                self.trace.write(
                    {
                        "type": "advantages",
                        "t": self.state.t,
                        "group": sub.label,
                        "rows": [r.to_wire() for r in report.rows],
                    }
                )
        return plan

    def _check_post_defender(
        self, observations: list[tuple[_SubGame, Observation, bool]]
    ) -> None:
        for sub, obs, exited in observations:
            report = compute_advantages(self.env, self.scheme, sub.platoons, obs)
            low = report.min_advantage()
            if not low >= -1:
                raise InvariantViolation(
                    f"advantage dropped below -1 after defender action at "
                    f"t={self.state.t} for group {sub.label!r}: min {low}"
                )
            if exited:
                for part, center in zip(self.scheme.partitions, sub.platoons.centers):
                    if center is not None and center != part.center:
                        raise InvariantViolation(
                            f"platoon failed to recenter within one action of the "
                            f"adversary exiting the visible region at t={self.state.t}"
                        )

    def attacker_phase(self, group_flows: dict[str, list[Flow]] | None = None) -> MovePlan:
        if self.state.phase is not Phase.ATTACKER:
            raise ProtocolError(f"phase is {self.state.phase.value}")
        if group_flows is None:
            plan = next_attacker_move(self.cfg.strategy, self.state, self.env)
        else:
            plan = MovePlan.from_group_flows(group_flows)
        self.state = apply_move(self.env, self.state, Phase.ATTACKER, plan)
        self._sync_subgames()
        self.trace.write(
            {
                "type": "phase",
                "t": self.state.t,
                "phase": "attacker",
                "mover": "attacker",
                "flows": plan.to_wire(),
                "group_flows": {
                    label: [[f.src, f.dst, rational_str(f.amount)] for f in fl]
                    for label, fl in (plan.group_flows or ())
                },
                "defender_amounts": self.state.defender.to_wire(),
                "attacker_amounts": self.state.attacker.to_wire(),
            }
        )
        return plan

    def _sync_subgames(self) -> None:
        """Split defender sub-forces in place to mirror attacker splits."""
        new_subgames: list[_SubGame] = []
        for sub in self.subgames:
            descendants = [
                g
                for g in self.state.groups
                if g.label == sub.label or g.label.startswith(sub.label + ".")
            ]
            if not descendants:
                raise ProtocolError(f"attacker group {sub.label!r} vanished")
            if len(descendants) == 1 and descendants[0].label == sub.label:
                sub.mass = descendants[0].amount
                new_subgames.append(sub)
                continue
            for child in sorted(descendants, key=lambda g: g.label):
                new_subgames.append(
                    _SubGame(
                        label=child.label,
                        mass=child.amount,
                        platoons=sub.platoons,
                        was_visible=sub.was_visible,
                    )
                )
        self.subgames = new_subgames

    def evaluate_phase(self) -> bool:
        if self.state.phase is not Phase.EVALUATE:
            raise ProtocolError(f"phase is {self.state.phase.value}")
        safe = is_safe(self.state, self.env.path)
        self.trace.write(
            {
                "type": "phase",
                "t": self.state.t,
                "phase": "evaluate",
                "mover": None,
                "flows": [],
                "defender_amounts": self.state.defender.to_wire(),
                "attacker_amounts": self.state.attacker.to_wire(),
                "safe": safe,
            }
        )
        if not safe:
            witness = breached_nodes(self.state, self.env.path)[0]
            self._finish(ATTACKER_WIN, win_step=self.state.t, witness=witness)
            return False
        if self.cfg.strategy.deterministic:
            key = (
                tuple(sorted(self.state.defender.amounts.items())),
                tuple(sorted(self.state.groups)),
                tuple((sub.label, sub.platoons.centers) for sub in self.subgames),
                self.cfg.strategy.cursor_key(),
            )
            if key in self._seen_states:
                self._finish(DEFENDED_CYCLE)
                return True
            self._seen_states.add(key)
        self.state = advance_timestep(self.state)
        if self.state.t >= self.max_steps:
            self._finish(DEFENDED_HORIZON)
        return True

    def _finish(self, result: str, win_step: int | None = None, witness: str | None = None) -> None:
        self.outcome = GameOutcome(
            result=result,
            steps=self.state.t,
            win_step=win_step,
            witness=witness,
            trace_path=self.trace.path,
        )
        self.trace.write(
            {
                "type": "outcome",
                "result": result,
                "steps": self.state.t,
                "win_step": win_step,
                "witness": witness,
            }
        )
        self.trace.flush()

    def run(self, *, allow_splits: bool) -> GameOutcome:
        while self.outcome is None:
            self.defender_phase()
            self.attacker_phase()
            if not allow_splits and len(self.state.groups) > 1:
                raise ProtocolError(
                    "attacker split mass in a single-group game; use the "
                    "parallel sub-game runner"
                )
            self.evaluate_phase()
        return self.outcome


def run_game(cfg: GameConfig) -> GameOutcome:
    """Run a whole-mass game to completion (splits are a protocol error)."""
    return Game(cfg).run(allow_splits=False)


def run_parallel_subgames(cfg: GameConfig) -> GameOutcome:
    """Run with attacker splits mirrored by proportional defender splits."""
    return Game(cfg).run(allow_splits=True)


def subgame_defender_sum(game: Game) -> AssetDistribution:
    """Per-node defender amounts summed across sub-games plus statics;
    must equal the live distribution exactly at any point."""
    return game._assemble_defender()


def replay(trace_path: str) -> GameOutcome:
    """Re-execute a trace move by move and re-derive the outcome.

    Every recorded post-move distribution and safety flag is compared
    against the recomputation; the first divergence raises, pointing at
    the offending record.
    """
    records = read_trace(trace_path)
    if not records or records[0].get("type") != "header":
        raise ReplayCorruptionError(0, "missing header record")
    header = records[0]
    env = environment_from_dict(header)
    init = records[1]
    if init.get("type") != "init":
        raise ReplayCorruptionError(1, "missing init record")
    groups = tuple(
        AttackerGroup(label, node, rational(amount))
        for label, node, amount in init["groups"]
    )
    state = GameState(
        t=0,
        defender=AssetDistribution.from_wire(init["defender_amounts"]),
        attacker=AssetDistribution.from_wire(init["attacker_amounts"]),
        groups=groups,
        phase=Phase.DEFENDER,
    )
    outcome: GameOutcome | None = None
    recorded_outcome: dict | None = None
    if not is_safe(state, env.path):
        outcome = GameOutcome(
            result=ATTACKER_WIN,
            steps=0,
            win_step=0,
            witness=breached_nodes(state, env.path)[0],
            trace_path=trace_path,
        )
    for idx, record in enumerate(records[2:], start=2):
        kind = record.get("type")
        if kind == "advantages":
            continue
        if kind == "outcome":
            recorded_outcome = record
            break
        if kind != "phase":
            raise ReplayCorruptionError(idx, f"unexpected record type {kind!r}")
        phase = record["phase"]
        try:
            if phase == "defender":
                plan = MovePlan.from_flows(
                    Flow(src, dst, rational(a)) for src, dst, a in record["flows"]
                )
                state = apply_move(env, state, Phase.DEFENDER, plan)
            elif phase == "attacker":
                group_flows = {
                    label: [Flow(src, dst, rational(a)) for src, dst, a in fl]
                    for label, fl in record["group_flows"].items()
                }
                plan = MovePlan.from_group_flows(group_flows)
                if plan.to_wire() != record["flows"]:
                    raise ReplayCorruptionError(
                        idx, "aggregate flows disagree with per-group flows"
                    )
                state = apply_move(env, state, Phase.ATTACKER, plan)
            else:
                safe = is_safe(state, env.path)
                if safe != record["safe"]:
                    raise ReplayCorruptionError(
                        idx, f"recorded safe={record['safe']} but replay says {safe}"
                    )
                if not safe:
                    witness = breached_nodes(state, env.path)[0]
                    outcome = GameOutcome(
                        result=ATTACKER_WIN,
                        steps=state.t,
                        win_step=state.t,
                        witness=witness,
                        trace_path=trace_path,
                    )
                else:
                    state = advance_timestep(state)
                continue
        except (IllegalMoveError, ProtocolError) as exc:
            raise ReplayCorruptionError(idx, str(exc)) from exc
        for side, key in (("defender", "defender_amounts"), ("attacker", "attacker_amounts")):
            recorded = AssetDistribution.from_wire(record[key])
            actual = state.defender if side == "defender" else state.attacker
            if recorded != actual:
                raise ReplayCorruptionError(
                    idx, f"{side} amounts diverge: {actual.to_wire()} != {record[key]}"
                )
    if recorded_outcome is None:
        raise ReplayCorruptionError(len(records), "trace has no outcome record")
    if outcome is None:
        outcome = GameOutcome(
            result=recorded_outcome["result"],
            steps=state.t,
            win_step=recorded_outcome.get("win_step"),
            witness=recorded_outcome.get("witness"),
            trace_path=trace_path,
        )
    if (
        outcome.result != recorded_outcome["result"]
        or outcome.win_step != recorded_outcome.get("win_step")
        or outcome.witness != recorded_outcome.get("witness")
    ):
        raise ReplayCorruptionError(
            len(records) - 1,
            f"outcome diverges: replayed {outcome.result}@{outcome.win_step} vs "
            f"recorded {recorded_outcome['result']}@{recorded_outcome.get('win_step')}",
        )
    return outcome
