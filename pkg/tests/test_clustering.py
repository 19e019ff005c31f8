import random
import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynmis.clustering import (
    LineGraphMirror,
    cc_cost,
    cluster_from_mis,
    is_maximal_matching,
    line_graph,
    matching_via_line_graph,
)
from dynmis.graph import Graph, PriorityMap, apply_change
from dynmis.oracle import brute_force_cc_opt, greedy_mis

from conftest import CHANGE_TYPES, instance_for, random_gnp


def triangle():
    return Graph.build(nodes=[0, 1, 2], edges=[(0, 1), (1, 2), (0, 2)])


def test_cluster_triangle_single_block():
    g = triangle()
    p = PriorityMap.from_order([1, 0, 2])
    cl = cluster_from_mis(g, p, greedy_mis(g, p))
    assert cl.cluster_of == {0: 1, 1: 1, 2: 1}
    assert cc_cost(g, cl) == 0


def test_cluster_path_two_blocks():
    g = Graph.build(nodes=[0, 1, 2], edges=[(0, 1), (1, 2)])
    p = PriorityMap.from_order([0, 1, 2])
    cl = cluster_from_mis(g, p, greedy_mis(g, p))
    assert cl.cluster_of == {0: 0, 1: 0, 2: 2}
    assert cc_cost(g, cl) == 1


def test_cluster_star_with_leaves_inside():
    # four leaves in the set; the center joins the lowest-priority leaf
    g = Graph.build(nodes=range(5), edges=[(0, i) for i in range(1, 5)])
    p = PriorityMap.from_order([3, 1, 2, 4, 0])
    a = greedy_mis(g, p)
    assert not a[0]
    cl = cluster_from_mis(g, p, a)
    assert cl.cluster_of[0] == 3
    assert all(cl.cluster_of[i] == i for i in range(1, 5))


def test_cluster_rejects_broken_assignment():
    g = Graph.build(nodes=[0, 1], edges=[(0, 1)])
    p = PriorityMap.from_order([0, 1])
    with pytest.raises(ValueError):
        cluster_from_mis(g, p, {0: False, 1: False})


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 10**9))
def test_clustering_is_a_partition_anchored_at_members(seed):
    rng = random.Random(seed)
    g = random_gnp(rng.randrange(1, 10), 0.35, rng)
    p = PriorityMap(rng.getrandbits(64))
    a = greedy_mis(g, p)
    cl = cluster_from_mis(g, p, a)
    assert set(cl.cluster_of) == set(g.visible_nodes())
    centers = {c for c in cl.cluster_of.values()}
    assert centers == {v for v, inside in a.items() if inside}
    for v, c in cl.cluster_of.items():
        assert c == v or g.has_edge(v, c)


def test_line_graph_shapes():
    lg = line_graph(triangle())
    assert len(lg.graph) == 3 and len(lg.graph.edges()) == 3  # triangle again
    path4 = Graph.build(nodes=range(4), edges=[(0, 1), (1, 2), (2, 3)])
    lg = line_graph(path4)
    assert len(lg.graph) == 3 and len(lg.graph.edges()) == 2  # a 3-node path
    star = Graph.build(nodes=range(5), edges=[(0, i) for i in range(1, 5)])
    lg = line_graph(star)
    assert len(lg.graph) == 4 and len(lg.graph.edges()) == 6  # complete graph


def test_matching_single_edge_and_path():
    g = Graph.build(nodes=[0, 1], edges=[(0, 1)])
    assert matching_via_line_graph(g, PriorityMap(0)) == {(0, 1)}
    path = Graph.build(nodes=[0, 1, 2], edges=[(0, 1), (1, 2)])
    p_edges = PriorityMap.from_order([0, 1])  # edge (0,1) drawn before (1,2)
    assert matching_via_line_graph(path, p_edges) == {(0, 1)}


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 10**9))
def test_matching_is_maximal(seed):
    rng = random.Random(seed)
    g = random_gnp(rng.randrange(2, 10), 0.4, rng)
    m = matching_via_line_graph(g, PriorityMap(rng.getrandbits(64)))
    assert is_maximal_matching(g, m)


def test_three_path_matching_mean():
    # per 3-edge path the matching has size 2 unless the middle edge is
    # drawn first (probability 1/3): expected size 5/3 per path
    paths = 60
    g = Graph.build(nodes=range(4 * paths))
    for i in range(paths):
        b = 4 * i
        for j in range(3):
            g.add_edge(b + j, b + j + 1)
    sizes = [
        len(matching_via_line_graph(g, PriorityMap(seed))) for seed in range(400)
    ]
    mean = statistics.fmean(sizes)
    expect = 5 * len(g.adjacency) / 12
    assert abs(mean - expect) / expect < 0.05


def test_mirror_tracks_line_graph_under_churn():
    rng = random.Random(4)
    mirror = LineGraphMirror()
    g = Graph()
    for step in range(120):
        inst = instance_for(g, rng.choice(CHANGE_TYPES), rng)
        if inst is None:
            continue
        g0, c = inst
        if g0 is not g:  # skip instances that pre-mutate the graph (unmute)
            continue
        for lc in mirror.apply(c):
            pass
        g = apply_change(g, c)
        fresh = line_graph(g)
        assert len(mirror.mirror.visible_nodes()) == len(fresh.graph)
        have = {frozenset(e) for e in mirror.node_of_edge}
        want = {frozenset(e) for e in fresh.node_of_edge}
        assert have == want
        # mirrored adjacency matches a freshly built line graph
        remap = {mirror.node_of_edge[e]: fresh.node_of_edge[e] for e in mirror.node_of_edge}
        for i, nbrs in mirror.mirror.adjacency.items():
            assert {remap[j] for j in nbrs} == fresh.graph.adjacency[remap[i]]


def test_mirror_matching_is_history_independent():
    # two different build orders of the same graph, same edge priorities
    edges = [(0, 1), (1, 2), (2, 3), (3, 0), (1, 3)]
    g_target = Graph.build(nodes=range(4), edges=edges)

    def build(order):
        m = LineGraphMirror()
        from dynmis.graph import edge_insert, node_insert

        for v in range(4):
            m.apply(node_insert(v))
        for e in order:
            m.apply(edge_insert(*e))
        return m

    a = build(edges)
    b = build(list(reversed(edges)))
    # identify edge nodes by the edge they mirror, then match priorities
    for seed in range(30):
        pa = PriorityMap.from_draws(
            {a.node_of_edge[e]: PriorityMap(seed)[i] for i, e in enumerate(sorted(a.node_of_edge))}
        )
        pb = PriorityMap.from_draws(
            {b.node_of_edge[e]: PriorityMap(seed)[i] for i, e in enumerate(sorted(b.node_of_edge))}
        )
        assert a.matching(pa) == b.matching(pb)
        assert is_maximal_matching(g_target, a.matching(pa))


def test_cost_against_bruteforce_small():
    rng = random.Random(8)
    for _ in range(25):
        g = random_gnp(rng.randrange(2, 8), 0.5, rng)
        opt = brute_force_cc_opt(g)
        costs = []
        for seed in range(300):
            p = PriorityMap(seed * 31 + 7)
            costs.append(cc_cost(g, cluster_from_mis(g, p, greedy_mis(g, p))))
        assert min(costs) >= opt
        assert statistics.fmean(costs) <= 3 * opt + 0.35
