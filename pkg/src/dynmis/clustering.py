"""Clustering and matching structures derived from the maintained
independent set.

Every IN node anchors a cluster; every OUT node joins its minimum-priority
IN neighbor. Simulating the same machinery on the line graph (one node per
edge, adjacent when edges share an endpoint) turns the independent-set
maintainer into a maximal-matching maintainer; edge-node priorities are
drawn when the edge is created and persist for its lifetime, so the
reduction stays history independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

from .graph import (
    ChangeKind,
    Graph,
    NodeId,
    PriorityMap,
    TopologyChange,
    apply_change,
    node_delete_abrupt,
    node_insert,
)
from .oracle import MisAssignment, greedy_mis

Edge = tuple[NodeId, NodeId]


def _canon(u: NodeId, v: NodeId) -> Edge:
    return (u, v) if u < v else (v, u)


@dataclass
class Clustering:
    """cluster_of maps every visible node to its cluster center, an IN node;
    centers map to themselves."""

    cluster_of: dict[NodeId, NodeId]

    def blocks(self) -> dict[NodeId, list[NodeId]]:
        out: dict[NodeId, list[NodeId]] = {}
        for v, center in self.cluster_of.items():
            out.setdefault(center, []).append(v)
        return out


def cluster_from_mis(g: Graph, p: PriorityMap, a: MisAssignment) -> Clustering:
    """Each IN node is its own center; each OUT node joins the
    minimum-priority IN neighbor. Raises if an OUT node has none (the
    assignment then violates maximality)."""
    cluster_of: dict[NodeId, NodeId] = {}
    vis = g.visible
    for v in g.visible_nodes():
        if a[v]:
            cluster_of[v] = v
            continue
        anchors = [u for u in g.adjacency[v] if vis[u] and a[u]]
        if not anchors:
            raise ValueError(f"node {v} is OUT but has no IN neighbor")
        cluster_of[v] = min(anchors, key=p.__getitem__)
    return Clustering(cluster_of)


def cc_cost(g: Graph, cl: Clustering) -> int:
    """Missing intra-cluster pairs plus present inter-cluster edges."""
    cluster_of = cl.cluster_of
    for v in g.visible_nodes():
        if v not in cluster_of:
            raise ValueError(f"clustering missing node {v}")
    sizes: dict[NodeId, int] = {}
    for c in cluster_of.values():
        sizes[c] = sizes.get(c, 0) + 1
    intra = 0
    cross = 0
    for u, v in g.edges():
        if cluster_of[u] == cluster_of[v]:
            intra += 1
        else:
            cross += 1
    missing = sum(n * (n - 1) // 2 for n in sizes.values()) - intra
    return missing + cross


class LineGraph(NamedTuple):
    graph: Graph
    node_of_edge: dict[Edge, NodeId]
    edge_of_node: dict[NodeId, Edge]


def line_graph(g: Graph) -> LineGraph:
    """One node per visible edge of g, adjacent iff the edges share an
    endpoint; returns the correspondence in both directions."""
    edges = sorted(g.edges())
    node_of_edge = {e: i for i, e in enumerate(edges)}
    lg = Graph.build(nodes=range(len(edges)))
    incident: dict[NodeId, list[NodeId]] = {}
    for e, i in node_of_edge.items():
        for endpoint in e:
            for j in incident.get(endpoint, ()):
                lg.add_edge(i, j)
            incident.setdefault(endpoint, []).append(i)
    return LineGraph(lg, node_of_edge, {i: e for e, i in node_of_edge.items()})


def matching_via_line_graph(g: Graph, p_edges: PriorityMap) -> set[Edge]:
    """Greedy independent set of the line graph, mapped back: a maximal
    matching of g. ``p_edges`` assigns priorities to edge nodes (indexed as
    in :func:`line_graph`)."""
    lg = line_graph(g)
    a = greedy_mis(lg.graph, p_edges)
    return {lg.edge_of_node[i] for i, inside in a.items() if inside}


def is_maximal_matching(g: Graph, matching: set[Edge]) -> bool:
    used: set[NodeId] = set()
    for u, v in matching:
        if not g.has_edge(u, v) or u in used or v in used:
            return False
        used.add(u)
        used.add(v)
    return all(u in used or v in used for u, v in g.edges())


@dataclass
class LineGraphMirror:
    """Maintains the line graph of a dynamic graph.

    Each change to the base graph expands into a sequence of single changes
    to the line graph (one per affected edge), to be applied with
    stabilization between them. Edge-node ids are never reused, so an edge
    node keeps one priority for its whole lifetime.
    """

    base: Graph = field(default_factory=Graph)
    mirror: Graph = field(default_factory=Graph)
    node_of_edge: dict[Edge, NodeId] = field(default_factory=dict)
    edge_of_node: dict[NodeId, Edge] = field(default_factory=dict)
    next_id: NodeId = 0

    def _insert_edge_node(self, e: Edge) -> TopologyChange:
        nid = self.next_id
        self.next_id += 1
        touching = [
            self.node_of_edge[other]
            for other in self.node_of_edge
            if other != e and (e[0] in other or e[1] in other)
        ]
        self.node_of_edge[e] = nid
        self.edge_of_node[nid] = e
        return node_insert(nid, sorted(touching))

    def _delete_edge_node(self, e: Edge) -> TopologyChange:
        nid = self.node_of_edge.pop(e)
        del self.edge_of_node[nid]
        return node_delete_abrupt(nid)

    def apply(self, c: TopologyChange) -> list[TopologyChange]:
        """Advance the base graph by one change; return the line-graph
        change sequence realizing it."""
        out: list[TopologyChange] = []
        k = c.kind
        if k is ChangeKind.EDGE_INSERT:
            out.append(self._insert_edge_node(_canon(c.u, c.v)))
        elif k in (ChangeKind.EDGE_DELETE_GRACEFUL, ChangeKind.EDGE_DELETE_ABRUPT):
            out.append(self._delete_edge_node(_canon(c.u, c.v)))
        elif k is ChangeKind.NODE_INSERT:
            if not c.muted:  # dormant edges surface only on unmute
                for u in sorted(c.neighbors):
                    out.append(self._insert_edge_node(_canon(c.v, u)))
        elif k in (ChangeKind.NODE_DELETE_GRACEFUL, ChangeKind.NODE_DELETE_ABRUPT):
            vis = self.base.visible
            for u in sorted(self.base.adjacency[c.v]):
                if vis[u]:
                    out.append(self._delete_edge_node(_canon(c.v, u)))
        elif k is ChangeKind.NODE_UNMUTE:
            for u in sorted(self.base.adjacency[c.v]):
                if self.base.is_visible(u):
                    out.append(self._insert_edge_node(_canon(c.v, u)))
        self.base = apply_change(self.base, c)
        for lc in out:
            self.mirror = apply_change(self.mirror, lc)
        return out

    def matching(self, p_edges: PriorityMap) -> set[Edge]:
        a = greedy_mis(self.mirror, p_edges)
        return {self.edge_of_node[i] for i, inside in a.items() if inside}
