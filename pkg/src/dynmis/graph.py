"""Dynamic undirected graph with per-node visibility, random node priorities,
and the topology-change event algebra.

Nodes carry a visibility flag: an invisible ("muted") node is stored with its
dormant edges but takes no part in neighbor queries until it is unmuted.
Priorities realize a uniform random order over nodes via independent 64-bit
draws keyed by (seed, node id), with the node id as tiebreak.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, NamedTuple

NodeId = int

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    # splitmix64 finalizer: consecutive inputs map to decorrelated 64-bit words
    x &= _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


class Priority(NamedTuple):
    """Totally ordered node priority: lexicographic on (draw, tiebreak)."""

    draw: int
    tiebreak: NodeId


class PriorityMap:
    """Uniform 64-bit priority draws, keyed by (seed, node id).

    Keying by node id rather than by draw order makes the assignment
    independent of construction history: with the same seed, node v receives
    the same priority no matter when it is created. A draw is fixed for the
    node's lifetime.
    """

    __slots__ = ("seed", "_override", "_identity")

    def __init__(self, seed: int = 0):
        self.seed = seed & _MASK
        self._override: dict[NodeId, int] = {}
        self._identity = False

    @classmethod
    def identity(cls) -> "PriorityMap":
        """Priorities equal to node ids; the fixed order used by the
        deterministic baseline."""
        p = cls(0)
        p._identity = True
        return p

    @classmethod
    def from_order(cls, nodes: Iterable[NodeId]) -> "PriorityMap":
        """Explicit order for tests: listed nodes get draws 0, 1, 2, ...
        Unlisted nodes fall back to keyed draws and sort after all listed
        ones with overwhelming probability."""
        p = cls(0)
        for i, v in enumerate(nodes):
            p._override[v] = i
        return p

    @classmethod
    def from_draws(cls, draws: dict[NodeId, int]) -> "PriorityMap":
        p = cls(0)
        p._override = dict(draws)
        return p

    def __getitem__(self, node: NodeId) -> Priority:
        if self._identity:
            return Priority(node, node)
        draw = self._override.get(node)
        if draw is None:
            draw = mix64(self.seed + (node + 1) * _GOLDEN)
        return Priority(draw, node)

    def is_lower(self, a: NodeId, b: NodeId) -> bool:
        return self[a] < self[b]


class ChangeKind(str, Enum):
    EDGE_INSERT = "edge_insert"
    EDGE_DELETE_GRACEFUL = "edge_delete_graceful"
    EDGE_DELETE_ABRUPT = "edge_delete_abrupt"
    NODE_INSERT = "node_insert"
    NODE_DELETE_GRACEFUL = "node_delete_graceful"
    NODE_DELETE_ABRUPT = "node_delete_abrupt"
    NODE_UNMUTE = "node_unmute"


EDGE_KINDS = frozenset(
    {ChangeKind.EDGE_INSERT, ChangeKind.EDGE_DELETE_GRACEFUL, ChangeKind.EDGE_DELETE_ABRUPT}
)
DELETE_KINDS = frozenset(
    {ChangeKind.NODE_DELETE_GRACEFUL, ChangeKind.NODE_DELETE_ABRUPT}
)


@dataclass(frozen=True)
class TopologyChange:
    """One atomic topology event.

    Edge changes use (u, v); node changes use v. ``neighbors`` gives the
    attachment set for node insertion; ``muted`` plants the inserted node
    invisible so it can be unmuted later.
    """

    kind: ChangeKind
    u: NodeId | None = None
    v: NodeId | None = None
    neighbors: tuple[NodeId, ...] = ()
    muted: bool = False

    @property
    def is_edge_change(self) -> bool:
        return self.kind in EDGE_KINDS

    def to_dict(self) -> dict:
        d: dict = {"op": self.kind.value}
        if self.is_edge_change:
            d["u"] = self.u
            d["v"] = self.v
        else:
            d["v"] = self.v
            if self.kind is ChangeKind.NODE_INSERT:
                d["nbrs"] = sorted(self.neighbors)
                if self.muted:
                    d["muted"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TopologyChange":
        try:
            kind = ChangeKind(d["op"])
        except (KeyError, ValueError) as exc:
            raise MalformedChange(f"unknown change record: {d!r}") from exc
        if kind in EDGE_KINDS:
            if "u" not in d or "v" not in d:
                raise MalformedChange(f"edge change needs u and v: {d!r}")
            return cls(kind, u=int(d["u"]), v=int(d["v"]))
        if "v" not in d:
            raise MalformedChange(f"node change needs v: {d!r}")
        if kind is ChangeKind.NODE_INSERT:
            nbrs = tuple(int(x) for x in d.get("nbrs", ()))
            return cls(kind, v=int(d["v"]), neighbors=nbrs, muted=bool(d.get("muted", False)))
        return cls(kind, v=int(d["v"]))


def edge_insert(u: NodeId, v: NodeId) -> TopologyChange:
    return TopologyChange(ChangeKind.EDGE_INSERT, u=u, v=v)


def edge_delete_graceful(u: NodeId, v: NodeId) -> TopologyChange:
    return TopologyChange(ChangeKind.EDGE_DELETE_GRACEFUL, u=u, v=v)


def edge_delete_abrupt(u: NodeId, v: NodeId) -> TopologyChange:
    return TopologyChange(ChangeKind.EDGE_DELETE_ABRUPT, u=u, v=v)


def node_insert(v: NodeId, neighbors: Iterable[NodeId] = (), muted: bool = False) -> TopologyChange:
    return TopologyChange(ChangeKind.NODE_INSERT, v=v, neighbors=tuple(neighbors), muted=muted)


def node_delete_graceful(v: NodeId) -> TopologyChange:
    return TopologyChange(ChangeKind.NODE_DELETE_GRACEFUL, v=v)


def node_delete_abrupt(v: NodeId) -> TopologyChange:
    return TopologyChange(ChangeKind.NODE_DELETE_ABRUPT, v=v)


def node_unmute(v: NodeId) -> TopologyChange:
    return TopologyChange(ChangeKind.NODE_UNMUTE, v=v)


class MalformedChange(ValueError):
    """A change record that cannot be parsed or is invalid for the graph."""


class InvalidChange(MalformedChange):
    """A well-formed change that does not apply to the current graph."""


@dataclass
class Graph:
    """Undirected simple graph; adjacency is symmetric, no self-loops.

    ``visible`` is False for muted nodes. Muted nodes keep their dormant
    edges in ``adjacency`` but are excluded from all visible-neighbor
    queries. While a node is muted its incident edge set must not change;
    ``apply_change`` enforces this.
    """

    adjacency: dict[NodeId, set[NodeId]] = field(default_factory=dict)
    visible: dict[NodeId, bool] = field(default_factory=dict)

    @classmethod
    def build(
        cls,
        nodes: Iterable[NodeId] = (),
        edges: Iterable[tuple[NodeId, NodeId]] = (),
        muted: Iterable[NodeId] = (),
    ) -> "Graph":
        g = cls()
        for v in nodes:
            g.add_node(v)
        for u, v in edges:
            g.add_node(u)
            g.add_node(v)
            g.add_edge(u, v)
        for v in muted:
            g.add_node(v)
            g.visible[v] = False
        return g

    # -- basic mutators (no validation; apply_change validates) --
    def add_node(self, v: NodeId, muted: bool = False) -> None:
        if v not in self.adjacency:
            self.adjacency[v] = set()
            self.visible[v] = not muted

    def add_edge(self, u: NodeId, v: NodeId) -> None:
        self.adjacency[u].add(v)
        self.adjacency[v].add(u)

    def remove_edge(self, u: NodeId, v: NodeId) -> None:
        self.adjacency[u].discard(v)
        self.adjacency[v].discard(u)

    def remove_node(self, v: NodeId) -> None:
        for u in self.adjacency.pop(v, ()):  # neighbors lose the edge
            self.adjacency[u].discard(v)
        self.visible.pop(v, None)

    # -- queries --
    @property
    def nodes(self) -> Iterator[NodeId]:
        return iter(self.adjacency)

    def __len__(self) -> int:
        return len(self.adjacency)

    def has_node(self, v: NodeId) -> bool:
        return v in self.adjacency

    def has_edge(self, u: NodeId, v: NodeId) -> bool:
        return u in self.adjacency and v in self.adjacency[u]

    def is_visible(self, v: NodeId) -> bool:
        return self.visible.get(v, False)

    def visible_nodes(self) -> list[NodeId]:
        return [v for v, vis in self.visible.items() if vis]

    def visible_neighbors(self, v: NodeId) -> list[NodeId]:
        vis = self.visible
        return [u for u in self.adjacency[v] if vis[u]]

    def degree(self, v: NodeId) -> int:
        """Number of visible neighbors."""
        vis = self.visible
        return sum(1 for u in self.adjacency[v] if vis[u])

    def edges(self) -> list[tuple[NodeId, NodeId]]:
        """Visible-to-visible edges, canonically ordered."""
        out = []
        vis = self.visible
        for u, nbrs in self.adjacency.items():
            if not vis[u]:
                continue
            for v in nbrs:
                if u < v and vis[v]:
                    out.append((u, v))
        return out

    def copy(self) -> "Graph":
        return Graph(
            adjacency={v: set(nbrs) for v, nbrs in self.adjacency.items()},
            visible=dict(self.visible),
        )

    def same_topology(self, other: "Graph") -> bool:
        return self.adjacency == other.adjacency and self.visible == other.visible


def apply_change(g: Graph, c: TopologyChange) -> Graph:
    """Return the post-change graph; the input graph is left untouched.

    Graceful and abrupt deletions yield the same topology (the distinction
    only affects protocol behavior). Raises :class:`InvalidChange` for
    malformed events: duplicate edges, missing endpoints, unmuting a visible
    node, or touching a muted node's incident edges.
    """
    k = c.kind
    if k in EDGE_KINDS:
        u, v = c.u, c.v
        if u is None or v is None or u == v:
            raise InvalidChange(f"bad edge endpoints: {c}")
        for x in (u, v):
            if not g.has_node(x):
                raise InvalidChange(f"endpoint {x} not in graph")
            if not g.is_visible(x):
                raise InvalidChange(f"endpoint {x} is muted; its edges are frozen")
        if k is ChangeKind.EDGE_INSERT:
            if g.has_edge(u, v):
                raise InvalidChange(f"edge ({u},{v}) already present")
            out = g.copy()
            out.add_edge(u, v)
        else:
            if not g.has_edge(u, v):
                raise InvalidChange(f"edge ({u},{v}) not present")
            out = g.copy()
            out.remove_edge(u, v)
        return out

    v = c.v
    if v is None:
        raise InvalidChange(f"node change needs a node: {c}")
    if k is ChangeKind.NODE_INSERT:
        if g.has_node(v):
            raise InvalidChange(f"node {v} already present")
        for u in c.neighbors:
            if not g.has_node(u):
                raise InvalidChange(f"attachment neighbor {u} not in graph")
            if not g.is_visible(u):
                raise InvalidChange(f"attachment neighbor {u} is muted")
        if len(set(c.neighbors)) != len(c.neighbors):
            raise InvalidChange(f"duplicate attachment neighbors: {c}")
        out = g.copy()
        out.add_node(v, muted=c.muted)
        for u in c.neighbors:
            out.add_edge(u, v)
        return out
    if k in DELETE_KINDS:
        if not g.has_node(v):
            raise InvalidChange(f"node {v} not in graph")
        if not g.is_visible(v):
            raise InvalidChange(f"cannot delete muted node {v}")
        for u in g.adjacency[v]:
            if not g.is_visible(u):
                raise InvalidChange(
                    f"deleting {v} would alter the edges of muted node {u}"
                )
        out = g.copy()
        out.remove_node(v)
        return out
    if k is ChangeKind.NODE_UNMUTE:
        if not g.has_node(v):
            raise InvalidChange(f"node {v} not in graph")
        if g.is_visible(v):
            raise InvalidChange(f"node {v} is already visible")
        out = g.copy()
        out.visible[v] = True
        return out
    raise InvalidChange(f"unhandled change kind {k}")  # pragma: no cover


class Locus(NamedTuple):
    """Where a change lands: ``focus`` is the one node whose membership
    condition may break; ``companion`` is the other endpoint for edge
    changes and equals ``focus`` for node changes."""

    focus: NodeId
    companion: NodeId


def locus(g_old: Graph, g_new: Graph, p: PriorityMap, c: TopologyChange) -> Locus:
    """For edge changes, focus is the higher-priority endpoint; for node
    changes both components are the changed node."""
    if c.is_edge_change:
        u, v = c.u, c.v
        if p[u] < p[v]:
            return Locus(v, u)
        return Locus(u, v)
    return Locus(c.v, c.v)


def lower_neighbors(g: Graph, p: PriorityMap, u: NodeId) -> set[NodeId]:
    """Visible neighbors of u with strictly smaller priority."""
    if not g.has_node(u):
        raise KeyError(f"unknown node {u}")
    pu = p[u]
    vis = g.visible
    return {w for w in g.adjacency[u] if vis[w] and p[w] < pu}
