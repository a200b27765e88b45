"""Executable verification of the resource bound at desk scale.

Two independent checks bracket the bound on concrete instances:

* sufficiency: breadth-first search over (adversary position, platoon
  centers) where the defender plays the implemented policy and the
  adversary branches over every legal single-asset move. SAFE_CLOSED
  means the reachable set is closed and breach-free.
* necessity: no on-path deployment one unit short of the bound can put
  three assets onto every possible strike window in time, decided by
  exhaustive deployment enumeration (or a window DP when enumeration is
  too large) over bipartite matching feasibility.

Neither check consults the closed-form bound; that is the point.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from ddab.adversary import GadgetStrategy, find_gadget
from ddab.engine import ATTACKER_WIN, GameConfig, GameOutcome, run_game
from ddab.gadgets import GadgetSpec, build_gadget
from ddab.graph import Environment, InputError
from ddab.policy import (
    PlatoonState,
    build_partitions,
    defender_step,
    greedy_unit_fill,
    initial_platoons,
    placement_units,
)
from ddab.state import AssetDistribution, Observation, rational

SAFE_CLOSED = "SAFE_CLOSED"
BREACH_FOUND = "BREACH_FOUND"
ATTACKER_WINS = "ATTACKER_WINS"
DEFENSE_HELD = "DEFENSE_HELD"

OUTSIDE = "<outside>"


class StateBudgetExceeded(RuntimeError):
    """The reachability search ran out of budget: inconclusive."""

    def __init__(self, explored: int, budget: int):
        super().__init__(
            f"state budget exhausted: explored {explored} of allowed {budget}"
        )
        self.explored = explored
        self.budget = budget


# -- bipartite matching ------------------------------------------------------


def max_bipartite_matching(candidates: list[set[int]], n_right: int) -> int:
    """Maximum matching size; candidates[i] lists right nodes open to left i."""
    match_right: list[int | None] = [None] * n_right

    def augment(i: int, seen: set[int]) -> bool:
        for j in candidates[i]:
            if j in seen:
                continue
            seen.add(j)
            if match_right[j] is None or augment(match_right[j], seen):
                match_right[j] = i
                return True
        return False

    size = 0
    for i in range(len(candidates)):
        if augment(i, set()):
            size += 1
    return size


# -- strike-window coverage --------------------------------------------------


def index_window_coverage(
    units: dict[int, int], alpha: int, k: int, path_len: int
) -> bool:
    """Can three units reach path positions alpha-1, alpha, alpha+1 within
    k hops each? Positions-only variant (on a shortest path, index
    distance equals graph distance)."""
    if not 2 <= alpha <= path_len - 1:
        raise InputError(f"strike center must be interior, got {alpha}")
    targets = (alpha - 1, alpha, alpha + 1)
    assets: list[int] = []
    for pos, count in sorted(units.items()):
        assets.extend([pos] * min(count, 3))
    candidates = [
        {j for j, t in enumerate(targets) if abs(pos - t) <= k} for pos in assets
    ]
    return max_bipartite_matching(candidates, 3) == 3


def three_window_coverage(
    env: Environment,
    k: int,
    deployment: AssetDistribution,
    alpha: int,
    attacker_unit=1,
) -> bool:
    """Matching feasibility on a concrete environment.

    The deployment must live on path nodes; fractional amounts decompose
    into whole units of `attacker_unit` by flooring (sub-unit shards
    cannot jointly cover one target, since safety is pointwise per
    sub-game).
    """
    unit = rational(attacker_unit)
    path = env.path
    if not 2 <= alpha <= len(path) - 1:
        raise InputError(f"strike center must be interior, got {alpha}")
    targets = [path.node_at(alpha - 1), path.node_at(alpha), path.node_at(alpha + 1)]
    assets: list[str] = []
    for node, amount in sorted(deployment.amounts.items()):
        if node not in path:
            raise InputError(f"deployment must sit on the path; found {node!r}")
        assets.extend([node] * min(int(amount / unit), 3))
    candidates = [
        {j for j, t in enumerate(targets) if env.distance(a, t) <= k} for a in assets
    ]
    return max_bipartite_matching(candidates, 3) == 3


@dataclass(frozen=True)
class WindowViolation:
    kind: str  # "single" | "pair" | "triple"
    lo: int
    hi: int
    required: int
    found: int


def _hall_windows(path_len: int, k: int) -> list[tuple[str, int, int, int]]:
    """Every window a defendable deployment must populate.

    A strike at alpha is answerable iff a 3-matching into the targets
    exists, which by the marriage condition splits into: one unit within
    k of each single target, two distinct units for each target pair,
    three for the full triple. Clipping at the path ends yields the
    remainder conditions for lengths just past a multiple of 2k+3.
    """
    windows = []
    clip = lambda x: max(1, min(path_len, x))
    for t in range(1, path_len + 1):
        windows.append(("single", clip(t - k), clip(t + k), 1))
    for i in range(1, path_len):
        windows.append(("pair", clip(i - k), clip(i + 1 + k), 2))
    for alpha in range(2, path_len):
        windows.append(("triple", clip(alpha - 1 - k), clip(alpha + 1 + k), 3))
    return windows


def necessary_window_audit(
    path_len: int, k: int, deployment: dict[int, int]
) -> list[WindowViolation]:
    """Report every window the deployment underfills.

    An empty report is equivalent to covering every strike center.
    Counts cap at 3 per position: extra stacking cannot buy coverage.
    """
    counts = {i: min(c, 3) for i, c in deployment.items()}
    prefix = [0] * (path_len + 1)
    for i in range(1, path_len + 1):
        prefix[i] = prefix[i - 1] + counts.get(i, 0)
    out = []
    for kind, lo, hi, required in _hall_windows(path_len, k):
        found = prefix[hi] - prefix[lo - 1]
        if found < required:
            out.append(WindowViolation(kind, lo, hi, required, found))
    return out


def _deployments(path_len: int, total: int, cap: int = 3):
    """All unit deployments over path positions, counts capped at `cap`."""

    def rec(pos: int, remaining: int, acc: list[int]):
        if pos > path_len:
            if remaining == 0:
                yield dict((i + 1, c) for i, c in enumerate(acc) if c)
            return
        slots_left = path_len - pos + 1
        if remaining > cap * slots_left:
            return
        for c in range(min(cap, remaining), -1, -1):
            acc.append(c)
            yield from rec(pos + 1, remaining - c, acc)
            acc.pop()

    yield from rec(1, total, [])


def deployment_count(path_len: int, total: int, cap: int = 3) -> int:
    table = {0: 1}
    for _ in range(path_len):
        new = {}
        for s, ways in table.items():
            for c in range(cap + 1):
                if s + c <= total:
                    new[s + c] = new.get(s + c, 0) + ways
        table = new
    return table.get(total, 0)


def min_covering_units(path_len: int, k: int) -> int:
    """Fewest units whose deployment answers every strike center.

    Dynamic program over positions with the trailing 2k+3 counts as
    state, checking each window as its right end closes. Independent of
    the closed-form bound: this is the necessity oracle for instances too
    large to enumerate.
    """
    width = 2 * k + 3
    by_hi: dict[int, list[tuple[int, int]]] = {}
    for _, lo, hi, required in _hall_windows(path_len, k):
        by_hi.setdefault(hi, []).append((lo, required))
    # state: counts at the last (width-1) positions, oldest first
    states: dict[tuple[int, ...], int] = {(0,) * (width - 1): 0}
    for pos in range(1, path_len + 1):
        new_states: dict[tuple[int, ...], int] = {}
        for tail, used in states.items():
            for c in range(0, 4):
                window = tail + (c,)
                ok = True
                for lo, required in by_hi.get(pos, ()):
                    span = pos - lo + 1
                    if sum(window[-span:]) < required:
                        ok = False
                        break
                if not ok:
                    continue
                key = window[1:]
                cost = used + c
                if cost < new_states.get(key, 10**9):
                    new_states[key] = cost
        states = new_states
        if not states:
            raise AssertionError("window constraints unsatisfiable")
    return min(states.values())


# -- sufficiency: exhaustive adversary reachability ---------------------------


@dataclass
class ReachabilityResult:
    verdict: str
    explored_states: int
    breach_trace: dict | None = None  # {"start": node, "moves": [node, ...]}
    # Starts the game premise rejects: the adversary may only open in the
    # safe set, and an under-resourced defense cannot dominate these.
    # Always empty at the full bound.
    inadmissible_starts: tuple[str, ...] = ()


def _observation_for(loc: str, env: Environment, k: int) -> Observation:
    if loc != OUTSIDE and env.path_distance(loc) <= k:
        return Observation(
            visible_attacker={loc: Fraction(1)},
            unobserved_mass=Fraction(0),
            total=Fraction(1),
        )
    return Observation(
        visible_attacker={}, unobserved_mass=Fraction(1), total=Fraction(1)
    )


def verify_sufficiency(
    env: Environment,
    k: int,
    defender_units: int,
    *,
    mode: str = "auto",
    state_budget: int = 200_000,
    policy_step=None,
) -> ReachabilityResult:
    """Exhaustively play every unit-adversary line against the policy.

    The abstract mode collapses all invisible adversary positions into a
    single OUTSIDE token that may re-enter at any node exactly at the
    sensing boundary; this over-approximates the adversary (sound for
    SAFE_CLOSED). Exact mode tracks concrete nodes, so its breach traces
    replay move-for-move through the engine. The default runs abstract
    first and confirms any breach exactly.

    `policy_step` substitutes the defender rule; the mutation hook the
    suite runner uses to prove the bracket actually bites.
    """
    if mode not in ("auto", "abstract", "exact"):
        raise InputError(f"unknown mode {mode!r}")
    if mode == "auto":
        result = verify_sufficiency(
            env, k, defender_units, mode="abstract", state_budget=state_budget,
            policy_step=policy_step,
        )
        if result.verdict == SAFE_CLOSED:
            return result
        return verify_sufficiency(
            env, k, defender_units, mode="exact", state_budget=state_budget,
            policy_step=policy_step,
        )
    abstract = mode == "abstract"
    if policy_step is None:
        policy_step = defender_step

    scheme = build_partitions(env.path, k)
    fill = greedy_unit_fill(scheme, defender_units)
    platoon_fill = tuple(
        0 if part.small else c for part, c in zip(scheme.partitions, fill)
    )
    static_units: dict[int, int] = {}
    for part, c in zip(scheme.partitions, fill):
        if part.small:
            for i in list(part.indices())[:c]:
                static_units[i] = 1
    parked = defender_units - sum(platoon_fill) - sum(static_units.values())
    if parked > 0:
        static_units[1] = static_units.get(1, 0) + parked

    placement_cache: dict[tuple[int | None, ...], dict[str, int]] = {}

    def defender_at(centers: tuple[int | None, ...]) -> dict[str, int]:
        placed = placement_cache.get(centers)
        if placed is None:
            units = dict(static_units)
            for i, c in placement_units(
                scheme, PlatoonState(centers=centers, units=platoon_fill)
            ).items():
                units[i] = units.get(i, 0) + c
            placed = {env.path.node_at(i): c for i, c in units.items()}
            placement_cache[centers] = placed
        return placed

    step_cache: dict[tuple[str, tuple[int | None, ...]], tuple[int | None, ...]] = {}

    def step(loc: str, centers: tuple[int | None, ...]) -> tuple[int | None, ...]:
        key = (loc, centers)
        out = step_cache.get(key)
        if out is None:
            obs = _observation_for(loc, env, k)
            new_state, _ = policy_step(
                env, scheme, PlatoonState(centers=centers, units=platoon_fill), obs
            )
            out = new_state.centers
            step_cache[key] = out
        return out

    def abstract_loc(v: str) -> str:
        return v if (not abstract or env.path_distance(v) <= k) else OUTSIDE

    boundary = sorted(v for v in env.graph.nodes if env.path_distance(v) == k)

    def attacker_moves(loc: str) -> list[str]:
        if loc == OUTSIDE:
            return [OUTSIDE] + boundary
        dests = sorted(env.graph.neighbors(loc)) + [loc]
        if abstract:
            return sorted({abstract_loc(v) for v in dests})
        return dests

    # Initial states: the adversary picks any start in the safe set; the
    # defender sees it only if visible and initializes accordingly.
    start_states: dict[tuple[str, tuple[int | None, ...]], str] = {}
    inadmissible: list[str] = []
    for v0 in sorted(env.graph.nodes):
        obs0 = _observation_for(v0, env, k)
        centers0 = initial_platoons(env, scheme, obs0, units=platoon_fill).centers
        if v0 in env.path and defender_at(centers0).get(v0, 0) < 1:
            inadmissible.append(v0)
            continue
        start_states.setdefault((abstract_loc(v0), centers0), v0)

    parents: dict[tuple, tuple | None] = {}
    frontier: deque[tuple] = deque()
    for key, concrete_start in start_states.items():
        state = (*key, concrete_start)
        parents[key] = None
        frontier.append(state)
    explored = 0

    while frontier:
        loc, centers, start = frontier.popleft()
        explored += 1
        if explored > state_budget:
            raise StateBudgetExceeded(explored, state_budget)
        moved = step(loc, centers)
        holdings = defender_at(moved)
        for dest in attacker_moves(loc):
            if dest != OUTSIDE and dest in env.path and holdings.get(dest, 0) < 1:
                moves = [dest]
                key = (loc, centers)
                while key is not None:
                    moves.append(key[0])
                    key = parents[key]
                moves.reverse()
                return ReachabilityResult(
                    verdict=BREACH_FOUND,
                    explored_states=explored,
                    breach_trace={"start": start, "moves": moves[1:]},
                    inadmissible_starts=tuple(inadmissible),
                )
            key = (dest, moved)
            if key not in parents:
                parents[key] = (loc, centers)
                frontier.append((*key, start))
    return ReachabilityResult(
        verdict=SAFE_CLOSED,
        explored_states=explored,
        inadmissible_starts=tuple(inadmissible),
    )


# -- necessity ---------------------------------------------------------------


@dataclass
class NecessityResult:
    verdict: str
    alpha: int
    policy_outcome: GameOutcome | None
    covering_deployment: dict[int, int] | None
    deployments_checked: int
    exhaustive: bool  # False when the DP oracle decided instead


def verify_necessity(
    spec: GadgetSpec,
    defender_units: int,
    *,
    trace_path: str | None = None,
    enumeration_budget: int = 300_000,
) -> NecessityResult:
    """Decide whether `defender_units` is beatable on the gadget family.

    The attacker wins iff every on-path deployment of that many units
    leaves some strike window un-answerable; a surviving deployment is
    returned as the defense witness. The implemented policy also plays
    the concrete gadget attacker so a breach, when one exists, comes with
    a replayable trace.
    """
    env = build_gadget(spec)
    n = spec.path_len

    strategy = GadgetStrategy(find_gadget(env, spec.k, spec.alpha))
    cfg = GameConfig(
        env=env,
        k=spec.k,
        defender_total=Fraction(defender_units),
        attacker_total=Fraction(1),
        strategy=strategy,
        trace_path=trace_path,
    )
    policy_outcome = run_game(cfg)

    checked = 0
    covering: dict[int, int] | None = None
    if deployment_count(n, defender_units) <= enumeration_budget:
        exhaustive = True
        for units in _deployments(n, defender_units):
            checked += 1
            if all(
                index_window_coverage(units, alpha, spec.k, n)
                for alpha in range(2, n)
            ):
                covering = units
                break
        beatable = covering is None
    else:
        exhaustive = False
        beatable = min_covering_units(n, spec.k) > defender_units
    return NecessityResult(
        verdict=ATTACKER_WINS if beatable else DEFENSE_HELD,
        alpha=spec.alpha,
        policy_outcome=policy_outcome,
        covering_deployment=covering,
        deployments_checked=checked,
        exhaustive=exhaustive,
    )


def hold_policy_step(env, scheme, platoons, obs, unit=Fraction(1)):
    """Deliberately broken defender rule (never moves): the mutation used
    to prove the sufficiency bracket detects a bad policy build."""
    from ddab.policy import subforce_flows

    return platoons, subforce_flows(env, scheme, platoons, platoons, unit)


MUTATIONS = {"hold": hold_policy_step}


def brute_force_coverage(
    env: Environment, k: int, deployment: AssetDistribution, alpha: int
) -> bool:
    """Independent oracle for the matching: try all ordered triples."""
    path = env.path
    targets = [path.node_at(alpha - 1), path.node_at(alpha), path.node_at(alpha + 1)]
    assets = []
    for node, amount in sorted(deployment.amounts.items()):
        assets.extend([node] * min(int(amount), 3))
    for trio in itertools.permutations(range(len(assets)), 3):
        if all(env.distance(assets[i], t) <= k for i, t in zip(trio, targets)):
            return True
    return False
