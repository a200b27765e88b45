"""Graph and defended-path representation.

The environment of a game is an undirected, connected, finite graph
together with a designated path from a start node S to a target node T.
The path must be a shortest S-T path; that single structural assumption
drives everything else in the package (platoon distances along the path
equal graph distances, off-path nodes can touch at most three consecutive
path nodes, and so on), so it is validated eagerly at load time.

Distances are exact BFS hop counts, memoized per source node.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence


class InputError(ValueError):
    """Bad caller-supplied value (unknown node, negative radius, ...)."""


class UnknownNodeError(InputError):
    def __init__(self, node: str):
        super().__init__(f"unknown node: {node!r}")
        self.node = node


class EnvironmentError_(ValueError):
    """The graph+path pair violates a structural requirement."""


class Graph:
    """Finite undirected graph over opaque string node ids.

    Nodes keep their load order; internally each id is also assigned a
    dense integer index (emitted next to traces so downstream tooling can
    reconstruct the mapping). Self-loops are rejected: staying in place is
    a property of moves, not of edges.
    """

    def __init__(self, nodes: Iterable[str], edges: Iterable[tuple[str, str]]):
        self.nodes: tuple[str, ...] = tuple(nodes)
        if len(set(self.nodes)) != len(self.nodes):
            raise InputError("duplicate node ids")
        self.index: dict[str, int] = {v: i for i, v in enumerate(self.nodes)}
        self._adj: dict[str, set[str]] = {v: set() for v in self.nodes}
        seen: set[frozenset[str]] = set()
        for a, b in edges:
            if a == b:
                raise InputError(f"self-loop edge at {a!r}")
            for v in (a, b):
                if v not in self.index:
                    raise UnknownNodeError(v)
            key = frozenset((a, b))
            if key in seen:
                raise InputError(f"duplicate edge {a!r}-{b!r}")
            seen.add(key)
            self._adj[a].add(b)
            self._adj[b].add(a)
        self._dist_cache: dict[str, dict[str, int]] = {}

    def __contains__(self, node: str) -> bool:
        return node in self.index

    def neighbors(self, node: str) -> frozenset[str]:
        if node not in self.index:
            raise UnknownNodeError(node)
        return frozenset(self._adj[node])

    def edges(self) -> list[tuple[str, str]]:
        """Undirected edges, each listed once, in deterministic order."""
        out = []
        for a in self.nodes:
            for b in sorted(self._adj[a], key=self.index.__getitem__):
                if self.index[a] < self.index[b]:
                    out.append((a, b))
        return out

    def has_edge(self, a: str, b: str) -> bool:
        return b in self._adj.get(a, ())

    def is_connected(self) -> bool:
        if not self.nodes:
            return True
        return len(self.distances_from(self.nodes[0])) == len(self.nodes)

    def distances_from(self, source: str) -> dict[str, int]:
        """BFS hop distances from source to every reachable node (memoized)."""
        if source not in self.index:
            raise UnknownNodeError(source)
        cached = self._dist_cache.get(source)
        if cached is not None:
            return cached
        dist = {source: 0}
        queue = deque([source])
        while queue:
            v = queue.popleft()
            for w in self._adj[v]:
                if w not in dist:
                    dist[w] = dist[v] + 1
                    queue.append(w)
        self._dist_cache[source] = dist
        return dist

    def shortest_path(self, a: str, b: str) -> list[str]:
        """One shortest a-b node sequence (BFS order deterministic by load order)."""
        if a not in self.index:
            raise UnknownNodeError(a)
        if b not in self.index:
            raise UnknownNodeError(b)
        parent: dict[str, str | None] = {a: None}
        queue = deque([a])
        while queue:
            v = queue.popleft()
            if v == b:
                break
            for w in sorted(self._adj[v], key=self.index.__getitem__):
                if w not in parent:
                    parent[w] = v
                    queue.append(w)
        if b not in parent:
            raise EnvironmentError_(f"no path between {a!r} and {b!r}")
        out = [b]
        while parent[out[-1]] is not None:
            out.append(parent[out[-1]])  # type: ignore[arg-type]
        return out[::-1]


def distance(g: Graph, a: str, b: str) -> int:
    """Exact BFS hop distance between two nodes."""
    if b not in g.index:
        raise UnknownNodeError(b)
    d = g.distances_from(a).get(b)
    if d is None:
        raise EnvironmentError_(f"no path between {a!r} and {b!r}")
    return d


@dataclass(frozen=True)
class PathSpec:
    """The defended path, ordered from start S to target T."""

    ordered_nodes: tuple[str, ...]

    def __post_init__(self):
        if len(self.ordered_nodes) < 3:
            raise EnvironmentError_("defended path needs at least 3 nodes")
        if len(set(self.ordered_nodes)) != len(self.ordered_nodes):
            raise EnvironmentError_("path nodes must be distinct")

    @property
    def start(self) -> str:
        return self.ordered_nodes[0]

    @property
    def target(self) -> str:
        return self.ordered_nodes[-1]

    def __len__(self) -> int:
        return len(self.ordered_nodes)

    def __contains__(self, node: str) -> bool:
        return node in self.ordered_nodes

    def node_at(self, i: int) -> str:
        """Path node by 1-based position."""
        if not 1 <= i <= len(self.ordered_nodes):
            raise InputError(f"path position out of range: {i}")
        return self.ordered_nodes[i - 1]

    def position(self, node: str) -> int:
        """1-based position of a path node."""
        try:
            return self.ordered_nodes.index(node) + 1
        except ValueError:
            raise InputError(f"{node!r} is not on the path") from None


@dataclass(frozen=True)
class VisibilityRegion:
    """Nodes within `k` hops of the path."""

    k: int
    members: frozenset[str]

    def __contains__(self, node: str) -> bool:
        return node in self.members


@dataclass
class ValidationReport:
    ok: bool
    problems: list[str] = field(default_factory=list)
    # Off-path nodes adjacent to path nodes, with the path positions they
    # touch. A valid environment can only show gaps <= 2 and <= 3 touches;
    # reported for inspection, never enforced separately.
    off_path_contacts: dict[str, tuple[int, ...]] = field(default_factory=dict)
    shortcut_witness: list[str] | None = None


def validate_environment(g: Graph, path: PathSpec) -> ValidationReport:
    """Check the structural assumptions of a playable environment.

    Rejects: unknown path nodes, non-adjacent consecutive path nodes,
    disconnected graphs, and paths that are not shortest start-target
    paths (the witness names a strictly shorter route).
    """
    report = ValidationReport(ok=True)
    for v in path.ordered_nodes:
        if v not in g:
            report.ok = False
            report.problems.append(f"path node {v!r} missing from graph")
    if not report.ok:
        return report
    for a, b in zip(path.ordered_nodes, path.ordered_nodes[1:]):
        if not g.has_edge(a, b):
            report.ok = False
            report.problems.append(f"consecutive path nodes {a!r},{b!r} not adjacent")
    if not g.is_connected():
        report.ok = False
        report.problems.append("graph is not connected")
    if not report.ok:
        return report

    d = distance(g, path.start, path.target)
    if d != len(path) - 1:
        witness = g.shortest_path(path.start, path.target)
        report.ok = False
        report.shortcut_witness = witness
        report.problems.append(
            f"path is not shortest: d({path.start!r},{path.target!r}) = {d} "
            f"< {len(path) - 1}; witness {'-'.join(witness)}"
        )
        return report

    path_set = set(path.ordered_nodes)
    for v in g.nodes:
        if v in path_set:
            continue
        touched = tuple(
            sorted(path.position(p) for p in g.neighbors(v) if p in path_set)
        )
        if touched:
            report.off_path_contacts[v] = touched
            # Derived consequence of the shortest-path assumption; a failure
            # here means the shortest-path check above is broken.
            if touched[-1] - touched[0] > 2 or len(touched) > 3:
                report.ok = False
                report.problems.append(
                    f"off-path node {v!r} touches path positions {touched}, "
                    "which contradicts the shortest-path property"
                )
    return report


class Environment:
    """A validated (graph, path) pair with precomputed path distances."""

    def __init__(self, graph: Graph, path: PathSpec, *, analysis_only: bool = False):
        self.graph = graph
        self.path = path
        if not analysis_only:
            report = validate_environment(graph, path)
            if not report.ok:
                raise EnvironmentError_("; ".join(report.problems))
        # Multi-source BFS from the whole path: d*(v) for every node.
        self.d_star: dict[str, int] = {}
        queue: deque[str] = deque()
        for p in path.ordered_nodes:
            self.d_star[p] = 0
            queue.append(p)
        while queue:
            v = queue.popleft()
            for w in graph.neighbors(v):
                if w not in self.d_star:
                    self.d_star[w] = self.d_star[v] + 1
                    queue.append(w)
        self._regions: dict[int, VisibilityRegion] = {}

    def distance(self, a: str, b: str) -> int:
        return distance(self.graph, a, b)

    def path_distance(self, v: str) -> int:
        if v not in self.graph:
            raise UnknownNodeError(v)
        return self.d_star[v]

    def visibility_region(self, k: int) -> VisibilityRegion:
        if k < 0:
            raise InputError(f"sensing distance must be nonnegative, got {k}")
        region = self._regions.get(k)
        if region is None:
            region = VisibilityRegion(
                k=k, members=frozenset(v for v, d in self.d_star.items() if d <= k)
            )
            self._regions[k] = region
        return region

    def visible(self, node: str, k: int) -> bool:
        return self.path_distance(node) <= k


def path_distance(g: Graph, path: PathSpec, v: str) -> int:
    """Minimum hop distance from v to any path node."""
    if v not in g:
        raise UnknownNodeError(v)
    return min(distance(g, v, p) for p in path.ordered_nodes)


def visibility_region(g: Graph, path: PathSpec, k: int) -> VisibilityRegion:
    """All nodes within k hops of the path."""
    if k < 0:
        raise InputError(f"sensing distance must be nonnegative, got {k}")
    return VisibilityRegion(
        k=k,
        members=frozenset(v for v in g.nodes if path_distance(g, path, v) <= k),
    )


def environment_to_dict(env: Environment) -> dict:
    return {
        "nodes": list(env.graph.nodes),
        "edges": [list(e) for e in env.graph.edges()],
        "path": list(env.path.ordered_nodes),
    }


def environment_from_dict(data: Mapping) -> Environment:
    for key in ("nodes", "edges", "path"):
        if key not in data:
            raise InputError(f"environment document missing {key!r}")
    nodes = data["nodes"]
    if not isinstance(nodes, Sequence) or any(not isinstance(v, str) for v in nodes):
        raise InputError("'nodes' must be an array of strings")
    edges = []
    for i, e in enumerate(data["edges"]):
        if not isinstance(e, Sequence) or len(e) != 2:
            raise InputError(f"edge #{i} must be a 2-element array, got {e!r}")
        edges.append((e[0], e[1]))
    graph = Graph(nodes, edges)
    path = PathSpec(tuple(data["path"]))
    return Environment(graph, path)


def load_environment(text: str) -> Environment:
    """Parse the JSON interchange document {nodes, edges, path}."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"environment file is not valid JSON: {exc}") from exc
    return environment_from_dict(data)


def node_index_table(g: Graph) -> dict[str, int]:
    """The id -> dense index mapping emitted alongside traces."""
    return dict(g.index)
