"""Worst-case gadget environments and the desk-scale test corpus.

A capture gadget plants an off-path node adjacent to three consecutive
path nodes, fed by an approach chain whose far end sits just outside the
visible region. An attacker staged there forces the defender to put
three assets on those targets within k actions of first detection; a
deployment that cannot is beaten on that graph.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable

from ddab.graph import Environment, EnvironmentError_, Graph, InputError, PathSpec
from ddab.policy import (
    PlatoonState,
    build_partitions,
    greedy_unit_fill,
    placement_units,
    required_units,
)


@dataclass(frozen=True)
class GadgetSpec:
    path_len: int
    k: int
    alpha: int  # path position of the middle strike target
    chain_len: int | None = None  # approach nodes beyond xi; default k
    outer_ring: bool = False  # add a second approach arc near the start node

    def __post_init__(self):
        if self.path_len < 3:
            raise InputError("gadget base path needs at least 3 nodes")
        if self.k < 0:
            raise InputError("sensing distance must be >= 0")
        if not 2 <= self.alpha <= self.path_len - 1:
            raise InputError(
                f"gadget center must be an interior path position, got {self.alpha}"
            )
        if self.chain_len is not None and self.chain_len < 0:
            raise InputError("chain length must be >= 0")


def path_node(i: int) -> str:
    return f"p{i}"


def chain_environment(n: int) -> Environment:
    """A bare path graph: the whole graph is the defended path."""
    nodes = [path_node(i) for i in range(1, n + 1)]
    edges = [(path_node(i), path_node(i + 1)) for i in range(1, n)]
    return Environment(Graph(nodes, edges), PathSpec(tuple(nodes)))


def build_gadget(spec: GadgetSpec) -> Environment:
    """Materialize the gadget graph for a spec.

    The default approach chain has k nodes beyond xi, so its far end sits
    at path distance k+1: invisible by exactly one hop, the least the
    attacker can get away with. The optional outer ring adds a second
    invisible arc tied to the start of the path so mass can leave the
    visible region on one side and genuinely re-enter on another.
    """
    n, k, alpha = spec.path_len, spec.k, spec.alpha
    chain_len = spec.chain_len if spec.chain_len is not None else k
    nodes = [path_node(i) for i in range(1, n + 1)]
    edges = [(path_node(i), path_node(i + 1)) for i in range(1, n)]
    xi = "xi"
    nodes.append(xi)
    for i in (alpha - 1, alpha, alpha + 1):
        edges.append((xi, path_node(i)))
    prev = xi
    for j in range(1, chain_len + 1):
        q = f"q{j}"
        nodes.append(q)
        edges.append((prev, q))
        prev = q
    if spec.outer_ring:
        # Arc: p1 - s1 - ... - s_a - (chain tip). Long enough that the arc
        # is never a shortcut and its middle leaves the visible region.
        a = max(k + 1, alpha - chain_len - 2)
        s_prev = path_node(1)
        for j in range(1, a + 1):
            s = f"s{j}"
            nodes.append(s)
            edges.append((s_prev, s))
            s_prev = s
        edges.append((s_prev, prev))
    try:
        return Environment(Graph(nodes, edges), PathSpec(tuple(path_node(i) for i in range(1, n + 1))))
    except EnvironmentError_ as exc:
        raise InputError(f"gadget spec {spec} builds an invalid environment: {exc}") from exc


def policy_initial_units(path_len: int, k: int, budget: int | None) -> dict[int, int]:
    """The defense policy's opening deployment (per path position, in
    whole units) against an unobserved adversary, optionally short."""
    scheme = build_partitions(path_len, k)
    platoons = PlatoonState(
        centers=PlatoonState.at_centers(scheme).centers,
        units=greedy_unit_fill(scheme, budget),
    )
    return placement_units(scheme, platoons)


def exploitable_alphas(path_len: int, k: int, units: dict[int, int]) -> list[int]:
    """Strike centers the given deployment cannot answer in k actions."""
    from ddab.verifier import index_window_coverage

    return [
        alpha
        for alpha in range(2, path_len)
        if not index_window_coverage(units, alpha, k, path_len)
    ]


def gadget_for_necessity(path_len: int, k: int, *, outer_ring: bool = False) -> GadgetSpec:
    """A gadget aimed at the hole a one-unit-short policy deployment leaves.

    Placement proceeds start-to-target, so the shortfall lands near the
    target and the last exploitable strike center points at it.
    """
    bound = required_units(path_len, k)
    short = policy_initial_units(path_len, k, bound - 1)
    holes = exploitable_alphas(path_len, k, short)
    if not holes:
        raise InputError(
            f"deployment of {bound - 1} units unexpectedly covers every window "
            f"(path_len={path_len}, k={k})"
        )
    return GadgetSpec(path_len=path_len, k=k, alpha=holes[-1], outer_ring=outer_ring)


def decorated_environment(path_len: int, seed: int, max_nodes: int = 14) -> Environment:
    """A random valid environment: a path plus off-path decorations.

    Decorations are either nodes touching a short window of consecutive
    path nodes or pendant extensions of existing decorations; cross links
    are attempted and kept only when the environment stays valid.
    """
    rng = random.Random(seed)
    nodes = [path_node(i) for i in range(1, path_len + 1)]
    edges = [(path_node(i), path_node(i + 1)) for i in range(1, path_len)]
    off_path: list[str] = []
    budget = max_nodes - path_len
    for j in range(budget):
        name = f"u{j}"
        if off_path and rng.random() < 0.35:
            edges.append((rng.choice(off_path), name))
        else:
            window = rng.choice((1, 2, 3))
            start = rng.randint(1, max(1, path_len - window + 1))
            touch = range(start, min(path_len, start + window - 1) + 1)
            for i in touch:
                edges.append((name, path_node(i)))
        nodes.append(name)
        off_path.append(name)
        if rng.random() < 0.7:
            break
    env = Environment(Graph(nodes, edges), PathSpec(tuple(path_node(i) for i in range(1, path_len + 1))))
    # Optional cross link between decorations, kept only if still valid.
    if len(off_path) >= 2 and rng.random() < 0.5:
        a, b = rng.sample(off_path, 2)
        if not env.graph.has_edge(a, b):
            try:
                return Environment(Graph(nodes, edges + [(a, b)]), env.path)
            except EnvironmentError_:
                pass
    return env


@dataclass(frozen=True)
class CorpusInstance:
    id: str
    kind: str  # "gadget" | "decorated" | "chain"
    env: Environment
    k: int
    gadget: GadgetSpec | None = None

    @property
    def path_len(self) -> int:
        return len(self.env.path)


def desk_corpus(seed: int = 987) -> list[CorpusInstance]:
    """The small-instance corpus bracketing the resource bound.

    Covers path lengths 3..9 and sensing distances 0..2 with, per combo,
    the necessity gadget, a plain chain, and a seeded decorated graph; a
    few ring variants exercise multi-point re-entry. Everything stays
    within 14 nodes so exhaustive search stays instant.
    """
    instances: list[CorpusInstance] = []
    for n in range(3, 10):
        for k in range(0, 3):
            spec = gadget_for_necessity(n, k)
            instances.append(
                CorpusInstance(
                    id=f"gadget-n{n}-k{k}",
                    kind="gadget",
                    env=build_gadget(spec),
                    k=k,
                    gadget=spec,
                )
            )
            instances.append(
                CorpusInstance(
                    id=f"chain-n{n}-k{k}", kind="chain", env=chain_environment(n), k=k
                )
            )
            instances.append(
                CorpusInstance(
                    id=f"decorated-n{n}-k{k}",
                    kind="decorated",
                    env=decorated_environment(n, seed=seed + 17 * n + k),
                    k=k,
                )
            )
    for n, k in ((5, 1), (7, 1), (6, 2)):
        spec = gadget_for_necessity(n, k, outer_ring=True)
        if len(build_gadget(spec).graph.nodes) <= 14:
            instances.append(
                CorpusInstance(
                    id=f"ring-n{n}-k{k}",
                    kind="gadget",
                    env=build_gadget(spec),
                    k=k,
                    gadget=spec,
                )
            )
    return instances


def corpus_by_id(instances: Iterable[CorpusInstance]) -> dict[str, CorpusInstance]:
    return {inst.id: inst for inst in instances}
