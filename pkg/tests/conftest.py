"""Shared test helpers: small-graph enumeration and change-instance sampling."""

from __future__ import annotations

import random
from functools import lru_cache

import networkx as nx

from dynmis.graph import (
    Graph,
    TopologyChange,
    edge_delete_abrupt,
    edge_delete_graceful,
    edge_insert,
    node_delete_abrupt,
    node_delete_graceful,
    node_insert,
    node_unmute,
)

CHANGE_TYPES = (
    "edge_insert",
    "edge_delete_graceful",
    "edge_delete_abrupt",
    "node_insert",
    "node_delete_graceful",
    "node_delete_abrupt",
    "node_unmute",
)


@lru_cache(maxsize=1)
def atlas_graphs() -> tuple[Graph, ...]:
    """All connected-or-not graphs on at most 6 nodes, one per isomorphism
    class, relabeled to integer ids."""
    out = []
    for ag in nx.graph_atlas_g()[1:209]:
        g = Graph.build(nodes=range(ag.number_of_nodes()), edges=ag.edges())
        out.append(g)
    return tuple(out)


def instance_for(
    g: Graph, kind: str, rng: random.Random
) -> tuple[Graph, TopologyChange] | None:
    """A valid random change instance of the requested type for g, with the
    pre-change graph it applies to; None when the type has no instance."""
    vis = sorted(g.visible_nodes())
    if kind == "edge_insert":
        nonedges = [
            (u, v)
            for i, u in enumerate(vis)
            for v in vis[i + 1 :]
            if not g.has_edge(u, v)
        ]
        if not nonedges:
            return None
        return g, edge_insert(*rng.choice(nonedges))
    if kind in ("edge_delete_graceful", "edge_delete_abrupt"):
        edges = g.edges()
        if not edges:
            return None
        ctor = edge_delete_graceful if kind.endswith("graceful") else edge_delete_abrupt
        return g, ctor(*rng.choice(edges))
    if kind in ("node_delete_graceful", "node_delete_abrupt"):
        ok = [v for v in vis if all(g.is_visible(u) for u in g.adjacency[v])]
        if not ok:
            return None
        ctor = node_delete_graceful if kind.endswith("graceful") else node_delete_abrupt
        return g, ctor(rng.choice(ok))
    if kind == "node_insert":
        new_id = max(g.adjacency, default=-1) + 1
        nbrs = [u for u in vis if rng.random() < 0.5]
        return g, node_insert(new_id, nbrs)
    if kind == "node_unmute":
        if not vis:
            return None
        gm = g.copy()
        v = rng.choice(vis)
        gm.visible[v] = False
        return gm, node_unmute(v)
    raise ValueError(kind)


def random_gnp(n: int, p: float, rng: random.Random) -> Graph:
    g = Graph.build(nodes=range(n))
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < p:
                g.add_edge(u, v)
    return g
