"""The platoon defense policy and its resource bound.

The path is split into consecutive partitions of 2k+3 nodes (one
remainder partition may be smaller, placed at the target end). Every
partition of size >= 3 is guarded by a platoon: three unit assets on
consecutive path nodes moving as a rigid group, tracked by its center
position. Remainder partitions of size 1 or 2 get one static unit per
node and never move.

Per partition, the policy compares how fast the observed adversary can
reach each path node (`d_A`) with how fast the platoon can (`d_D`, index
distance to the platoon center, which equals graph distance because the
path is shortest). The difference is the advantage. One platoon step per
turn keeps every advantage >= -1, which is exactly what rules out a
capture: taking a path node needs advantage <= -2 there.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from ddab.graph import Environment, InputError, PathSpec
from ddab.state import AssetDistribution, Flow, Observation, rational


class _Unobserved:
    """Distance/advantage sentinel that compares greater than every int."""

    __slots__ = ()
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __gt__(self, other):
        return not isinstance(other, _Unobserved)

    def __ge__(self, other):
        return True

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return isinstance(other, _Unobserved)

    def __repr__(self):
        return "UNOBSERVED"


UNOBSERVED = _Unobserved()


def required_units(path_len: int, k: int) -> int:
    """Defender units needed per unit of attacker mass.

    Three per full partition of 2k+3 path nodes, plus min(remainder, 3)
    for the leftover block. Saturates at 3 once one partition covers the
    whole path.
    """
    if path_len < 1:
        raise InputError(f"path length must be >= 1, got {path_len}")
    if k < 0:
        raise InputError(f"sensing distance must be >= 0, got {k}")
    width = 2 * k + 3
    return 3 * (path_len // width) + min(path_len % width, 3)


def required_assets(path_len: int, k: int, attacker_total) -> Fraction:
    """Exact defender total that guarantees the path can be guarded."""
    y = rational(attacker_total)
    if y <= 0:
        raise InputError(f"attacker total must be positive, got {attacker_total}")
    return required_units(path_len, k) * y


@dataclass(frozen=True)
class Partition:
    """Consecutive block of path positions [lo, hi], 1-based inclusive."""

    lo: int
    hi: int
    center: int
    small: bool  # size 1 or 2: static single units, no platoon

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    def indices(self) -> range:
        return range(self.lo, self.hi + 1)

    @property
    def clamp_lo(self) -> int:
        return self.lo + 1

    @property
    def clamp_hi(self) -> int:
        return self.hi - 1


@dataclass(frozen=True)
class PartitionScheme:
    k: int
    path_len: int
    partitions: tuple[Partition, ...]

    def partition_of(self, i: int) -> Partition:
        for part in self.partitions:
            if part.lo <= i <= part.hi:
                return part
        raise InputError(f"path position out of range: {i}")

    @property
    def platoon_partitions(self) -> tuple[Partition, ...]:
        return tuple(p for p in self.partitions if not p.small)

    @property
    def small_partitions(self) -> tuple[Partition, ...]:
        return tuple(p for p in self.partitions if p.small)


def _middle(lo: int, hi: int) -> int:
    """Middle index; lower-middle for even-sized ranges."""
    return lo + (hi - lo) // 2


def build_partitions(path: PathSpec | int, k: int) -> PartitionScheme:
    """Split path positions 1..|P| into blocks of 2k+3, remainder last."""
    if k < 0:
        raise InputError(f"sensing distance must be >= 0, got {k}")
    n = path if isinstance(path, int) else len(path)
    if n < 1:
        raise InputError(f"path length must be >= 1, got {n}")
    width = 2 * k + 3
    parts: list[Partition] = []
    lo = 1
    while lo <= n:
        hi = min(lo + width - 1, n)
        size = hi - lo + 1
        parts.append(
            Partition(lo=lo, hi=hi, center=_middle(lo, hi), small=size <= 2)
        )
        lo = hi + 1
    return PartitionScheme(k=k, path_len=n, partitions=tuple(parts))


@dataclass(frozen=True)
class PlatoonState:
    """Platoon center per partition (None for small partitions) and the
    unit count actually deployed there (short counts only appear in
    deliberately under-resourced runs)."""

    centers: tuple[int | None, ...]
    units: tuple[int, ...]

    @classmethod
    def at_centers(cls, scheme: PartitionScheme) -> "PlatoonState":
        return cls(
            centers=tuple(None if p.small else p.center for p in scheme.partitions),
            units=tuple(p.size if p.small else 3 for p in scheme.partitions),
        )

    def with_centers(self, centers: Iterable[int | None]) -> "PlatoonState":
        return PlatoonState(centers=tuple(centers), units=self.units)


def greedy_unit_fill(scheme: PartitionScheme, budget: int | None) -> tuple[int, ...]:
    """Hand each partition its full need, start-to-target, until the pool
    runs dry. Shortfalls land on the partitions nearest the target."""
    units = []
    pool = budget
    for part in scheme.partitions:
        need = part.size if part.small else 3
        if pool is None:
            units.append(need)
        else:
            take = min(need, pool)
            units.append(take)
            pool -= take
    return tuple(units)


def platoon_nodes(part: Partition, center: int, count: int = 3) -> tuple[int, ...]:
    """Path positions a (possibly short) platoon occupies: center first,
    then the node before, then the node after."""
    order = (center, center - 1, center + 1)
    return order[:count]


def placement_units(
    scheme: PartitionScheme, platoons: PlatoonState
) -> dict[int, int]:
    """Unit count per path position for a platoon configuration."""
    out: dict[int, int] = {}
    for part, center, count in zip(
        scheme.partitions, platoons.centers, platoons.units
    ):
        if part.small:
            for i in part.indices():
                if count <= 0:
                    break
                out[i] = out.get(i, 0) + 1
                count -= 1
        else:
            assert center is not None
            for i in platoon_nodes(part, center, count):
                out[i] = out.get(i, 0) + 1
    return out


def placement_distribution(
    env: Environment,
    scheme: PartitionScheme,
    platoons: PlatoonState,
    unit: Fraction = Fraction(1),
) -> AssetDistribution:
    return AssetDistribution(
        {
            env.path.node_at(i): count * unit
            for i, count in placement_units(scheme, platoons).items()
        }
    )


@dataclass(frozen=True)
class AdvantageRow:
    i: int
    d_A: int | _Unobserved
    d_D: int
    a: int | _Unobserved
    in_frontier: bool

    def to_wire(self) -> dict:
        return {
            "i": self.i,
            "d_A": None if isinstance(self.d_A, _Unobserved) else self.d_A,
            "d_D": self.d_D,
            "a": None if isinstance(self.a, _Unobserved) else self.a,
            "in_frontier": self.in_frontier,
        }


@dataclass(frozen=True)
class AdvantageReport:
    rows: tuple[AdvantageRow, ...]

    def row(self, i: int) -> AdvantageRow:
        return self.rows[i - 1]

    def min_advantage(self) -> int | _Unobserved:
        finite = [r.a for r in self.rows if not isinstance(r.a, _Unobserved)]
        return min(finite) if finite else UNOBSERVED


def _observed_node(obs: Observation) -> str | None:
    """The single observed node of a point-group observation."""
    if len(obs.visible_attacker) > 1:
        raise InputError(
            "advantage computation is a single-group view; got an observation "
            f"spread over {sorted(obs.visible_attacker)}"
        )
    if not obs.visible_attacker:
        return None
    return next(iter(obs.visible_attacker))


def _frontier(part: Partition, center: int) -> range:
    """Positions between the platoon center and its nearest partition
    boundary, both ends inclusive. When the center sits exactly at the
    partition middle both boundaries tie and the whole partition counts,
    which demands positivity on both sides before recentering applies."""
    left = center - part.lo
    right = part.hi - center
    if left < right:
        return range(part.lo, center + 1)
    if right < left:
        return range(center, part.hi + 1)
    return range(part.lo, part.hi + 1)


def compute_advantages(
    env: Environment,
    scheme: PartitionScheme,
    platoons: PlatoonState,
    obs: Observation,
) -> AdvantageReport:
    """Per-node adversary lead over the local platoon, single-group view.

    Small partitions carry a static unit on each node, so their defender
    distance is 0 and they never join a frontier.
    """
    adv_node = _observed_node(obs)
    rows: list[AdvantageRow] = []
    for part, center in zip(scheme.partitions, platoons.centers):
        frontier = _frontier(part, center) if center is not None else ()
        for i in part.indices():
            if adv_node is None:
                d_a: int | _Unobserved = UNOBSERVED
            else:
                d_a = env.distance(env.path.node_at(i), adv_node)
            d_d = 0 if center is None else abs(i - center)
            a = UNOBSERVED if isinstance(d_a, _Unobserved) else d_a - d_d
            rows.append(
                AdvantageRow(
                    i=i, d_A=d_a, d_D=d_d, a=a, in_frontier=i in frontier
                )
            )
    return AdvantageReport(rows=tuple(rows))


def _sign(x: int) -> int:
    return (x > 0) - (x < 0)


def _step_partition(
    part: Partition, center: int, report: AdvantageReport
) -> int:
    """One platoon action inside one partition.

    Any negative advantage in the partition pulls the platoon one step
    toward the worst offender (ties to the smaller index), clamped to
    keep the platoon inside. With no negatives, an all-positive frontier
    lets the platoon drift one step back toward the partition center (an
    unobserved adversary lands here, since its advantages compare above
    every int). Otherwise hold.

    The negative check runs first: on full (odd) partitions the order is
    immaterial because a centered platoon's frontier spans both sides,
    but an even-sized partial partition has a one-sided frontier whose
    positivity must not mask a threat on the far side.
    """
    adv = {i: report.row(i).a for i in part.indices()}
    negatives = [
        (a, i) for i, a in adv.items() if not isinstance(a, _Unobserved) and a < 0
    ]
    if negatives:
        lo_side = [i for a, i in negatives if i < center]
        hi_side = [i for a, i in negatives if i > center]
        assert not (lo_side and hi_side), (
            "negative advantages on both sides of a platoon: "
            f"partition [{part.lo},{part.hi}], center {center}, rows {negatives}"
        )
        _, target = min(negatives, key=lambda pair: (pair[0], pair[1]))
        moved = center + _sign(target - center)
        return max(part.clamp_lo, min(part.clamp_hi, moved))
    frontier = [i for i in part.indices() if report.row(i).in_frontier]
    if all(adv[i] > 0 for i in frontier):
        return center + _sign(part.center - center)
    return center


def defender_step(
    env: Environment,
    scheme: PartitionScheme,
    platoons: PlatoonState,
    obs: Observation,
    unit: Fraction = Fraction(1),
) -> tuple[PlatoonState, tuple[Flow, ...]]:
    """One defender action: every platoon takes its branch independently.

    Returns the new platoon state plus the flows realizing it for a
    sub-force whose platoon units have size `unit` (three parallel
    one-hop flows per moved platoon; explicit stay flows otherwise).
    Small partitions never move.
    """
    report = compute_advantages(env, scheme, platoons, obs)
    new_centers: list[int | None] = []
    for part, center in zip(scheme.partitions, platoons.centers):
        if center is None:
            new_centers.append(None)
        else:
            new_centers.append(_step_partition(part, center, report))
    new_state = platoons.with_centers(new_centers)
    flows = subforce_flows(env, scheme, platoons, new_state, unit)
    return new_state, flows


def subforce_flows(
    env: Environment,
    scheme: PartitionScheme,
    old: PlatoonState,
    new: PlatoonState,
    unit: Fraction,
) -> tuple[Flow, ...]:
    """Flows moving a sub-force from one platoon configuration to the next."""
    flows: list[Flow] = []
    node = env.path.node_at
    for part, c_old, c_new, count in zip(
        scheme.partitions, old.centers, new.centers, old.units
    ):
        if part.small:
            for i in list(part.indices())[:count]:
                flows.append(Flow(node(i), node(i), unit))
            continue
        assert c_old is not None and c_new is not None
        src = platoon_nodes(part, c_old, count)
        dst = platoon_nodes(part, c_new, count)
        for s, d in zip(src, dst):
            flows.append(Flow(node(s), node(d), unit))
    return tuple(sorted(flows))


INIT_ITERATION_FACTOR = 2  # virtual-time cap: 2*|P| steps flags a bug


def initial_platoons(
    env: Environment,
    scheme: PartitionScheme,
    obs0: Observation,
    units: tuple[int, ...] | None = None,
) -> PlatoonState:
    """Pick initial platoon centers by stepping in virtual time.

    Platoons start at their partition centers and repeat the step rule
    until every advantage is >= -1; the loop provably terminates well
    inside 2*|P| iterations, so exceeding the cap is an internal bug, not
    a game outcome.
    """
    platoons = PlatoonState(
        centers=PlatoonState.at_centers(scheme).centers,
        units=units if units is not None else greedy_unit_fill(scheme, None),
    )
    for _ in range(INIT_ITERATION_FACTOR * scheme.path_len + 1):
        report = compute_advantages(env, scheme, platoons, obs0)
        if report.min_advantage() >= -1:
            return platoons
        platoons, _ = defender_step(env, scheme, platoons, obs0)
    raise AssertionError(
        "initialization failed to reach advantage >= -1 within "
        f"{INIT_ITERATION_FACTOR * scheme.path_len} virtual steps"
    )


def initialize(
    env: Environment,
    scheme: PartitionScheme,
    obs0: Observation,
    unit: Fraction = Fraction(1),
    units_budget: int | None = None,
) -> tuple[PlatoonState, AssetDistribution]:
    """Initial platoon centers plus the deployment realizing them:
    one `unit` of assets per platoon slot and per small-partition node."""
    platoons = initial_platoons(
        env, scheme, obs0, units=greedy_unit_fill(scheme, units_budget)
    )
    return platoons, placement_distribution(env, scheme, platoons, unit)
