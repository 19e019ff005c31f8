import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynmis.engine import ProtocolError, run_async, run_sync, stability_check
from dynmis.graph import (
    Graph,
    PriorityMap,
    apply_change,
    edge_insert,
    node_delete_abrupt,
    node_delete_graceful,
    node_insert,
)
from dynmis.oracle import greedy_mis, influenced_set
from dynmis.protocol import NodeState, ProtocolKind, ProtocolNode

from conftest import CHANGE_TYPES, instance_for, random_gnp


def two_in_nodes():
    g = Graph.build(nodes=[0, 1])
    p = PriorityMap.from_order([0, 1])
    return g, p, edge_insert(0, 1)


def test_sync_edge_insert_two_members():
    g, p, c = two_in_nodes()
    for kind in ProtocolKind:
        r = run_sync(g, p, c, kind)
        assert r.assignment == {0: True, 1: False}
        assert r.metrics.adjustments == 1
    r = run_sync(g, p, c, ProtocolKind.FOUR_STATE)
    # one announcement per endpoint, then the focus walks its three states
    assert len(r.round_logs[0].broadcasts) == 2
    assert r.metrics.broadcasts == 5
    assert r.pending_entries == {1: 1}


def test_template_cascade_flips_top_node_twice():
    # focus 0 with neighbors 1 and 4 joined by the path 1-2-3-4; evicting 0
    # promotes 4 in the first reaction wave and demotes it again three
    # rounds later once the ripple arrives through the path
    g = Graph.build(
        nodes=[9, 0, 1, 2, 3, 4], edges=[(0, 1), (0, 4), (1, 2), (2, 3), (3, 4)]
    )
    p = PriorityMap.from_order([9, 0, 1, 2, 3, 4])
    r = run_sync(g, p, edge_insert(9, 0), ProtocolKind.TEMPLATE)
    flips = [
        (v, b) for log in r.round_logs for v, _, b in log.state_changes if v == 4
    ]
    assert flips == [(4, NodeState.IN), (4, NodeState.OUT)]
    assert r.assignment == {9: True, 0: False, 1: True, 2: False, 3: True, 4: False}
    # the four-state machine absorbs the double flip into one PENDING visit
    r4 = run_sync(g, p, edge_insert(9, 0), ProtocolKind.FOUR_STATE)
    assert r4.assignment == r.assignment
    assert r4.pending_entries[4] == 1 and r4.ready_exits[4] == 1


def test_sync_noop_change_costs_preamble_only():
    # inserting an edge from an OUT node to a higher node changes nothing
    g = Graph.build(nodes=[0, 1, 2], edges=[(0, 1)])
    p = PriorityMap.from_order([0, 1, 2])
    c = edge_insert(1, 2)
    for kind in ProtocolKind:
        r = run_sync(g, p, c, kind)
        assert r.metrics.adjustments == 0
        assert r.metrics.broadcasts == 2  # the two endpoint announcements
        assert not r.pending_entries


def test_sync_isolated_node_insert():
    g = Graph()
    p = PriorityMap(3)
    r = run_sync(g, p, node_insert(0), ProtocolKind.FOUR_STATE)
    assert r.assignment == {0: True}
    assert r.metrics.adjustments == 0  # acquiring an output is not a change
    assert r.metrics.broadcasts <= 4


def test_sync_muted_insert_is_inert():
    g = Graph.build(nodes=[0])
    p = PriorityMap(3)
    r = run_sync(g, p, node_insert(1, [0], muted=True), ProtocolKind.FOUR_STATE)
    assert r.assignment == {0: True}
    assert r.metrics.broadcasts == 0 and r.metrics.rounds == 0


def test_graceful_delete_keeps_relay_until_stable():
    # star center in the set; graceful removal must re-seat the leaves
    g = Graph.build(nodes=range(4), edges=[(0, 1), (0, 2), (0, 3)])
    p = PriorityMap.from_order([0, 1, 2, 3])
    c = node_delete_graceful(0)
    want = greedy_mis(apply_change(g, c), p)
    for kind in ProtocolKind:
        r = run_sync(g, p, c, kind)
        assert r.assignment == want == {1: True, 2: True, 3: True}
        assert 0 not in r.assignment


def test_abrupt_star_center_seeds_all_leaves_at_once():
    g = Graph.build(nodes=range(4), edges=[(0, 1), (0, 2), (0, 3)])
    p = PriorityMap.from_order([0, 1, 2, 3])
    r = run_sync(g, p, node_delete_abrupt(0), ProtocolKind.FOUR_STATE)
    assert r.assignment == {1: True, 2: True, 3: True}
    first = r.round_logs[0]
    assert first.round == 1
    assert {v for v, _, b in first.state_changes if b is NodeState.PENDING} == {1, 2, 3}


def test_abrupt_rounds_within_cascade_bound():
    rng = random.Random(77)
    for _ in range(300):
        g = random_gnp(rng.randrange(2, 7), 0.5, rng)
        inst = instance_for(g, "node_delete_abrupt", rng)
        if inst is None:
            continue
        g0, c = inst
        p = PriorityMap(rng.getrandbits(64))
        s = influenced_set(g0, apply_change(g0, c), p, c)
        r = run_sync(g0, p, c, ProtocolKind.FOUR_STATE)
        assert r.metrics.rounds <= 3 * len(s) + 2


def test_sync_runs_are_reproducible():
    rng = random.Random(12)
    g = random_gnp(8, 0.4, rng)
    inst = instance_for(g, "edge_insert", rng)
    g0, c = inst
    p = PriorityMap(99)
    a = run_sync(g0, p, c, ProtocolKind.FOUR_STATE)
    b = run_sync(g0, p, c, ProtocolKind.FOUR_STATE)
    assert a.assignment == b.assignment
    assert a.metrics == b.metrics
    assert [(l.round, l.broadcasts, l.state_changes) for l in a.round_logs] == [
        (l.round, l.broadcasts, l.state_changes) for l in b.round_logs
    ]


def test_max_rounds_breach_is_hard_failure():
    g, p, c = two_in_nodes()
    with pytest.raises(ProtocolError):
        run_sync(g, p, c, ProtocolKind.FOUR_STATE, max_rounds=2)


def test_async_two_node_insert_any_schedule():
    g, p, c = two_in_nodes()
    results = {run_async(g, p, c, scheduler_seed=s).assignment == {0: True, 1: False} for s in range(20)}
    assert results == {True}


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9))
def test_async_matches_sequential_oracle_across_schedules(seed):
    rng = random.Random(seed)
    g = random_gnp(rng.randrange(2, 7), 0.45, rng)
    inst = instance_for(g, rng.choice(CHANGE_TYPES), rng)
    if inst is None:
        return
    g0, c = inst
    p = PriorityMap(rng.getrandbits(64))
    want = greedy_mis(apply_change(g0, c), p)
    for s in range(10):
        assert run_async(g0, p, c, scheduler_seed=s).assignment == want


def test_async_rejects_four_state():
    # the four-state machine counts rounds; it has no asynchronous mode
    g, p, c = two_in_nodes()
    from dynmis.harness import ScenarioError, Scenario, run_scenario
    from dynmis.graph import node_insert as ni

    with pytest.raises(ScenarioError):
        run_scenario(Scenario("x", [ni(0)]), kind=ProtocolKind.FOUR_STATE, mode="async")


def test_broadcast_bound_single_seeded():
    # non-abrupt changes: at most three broadcasts per affected node plus
    # the bootstrap announcements
    rng = random.Random(31)
    preamble = {
        "edge_insert": 2,
        "edge_delete_graceful": 0,
        "edge_delete_abrupt": 0,
        "node_delete_graceful": 0,
        "node_unmute": 1,
    }
    for _ in range(400):
        g = random_gnp(rng.randrange(2, 8), 0.4, rng)
        kind = rng.choice(list(preamble))
        inst = instance_for(g, kind, rng)
        if inst is None:
            continue
        g0, c = inst
        p = PriorityMap(rng.getrandbits(64))
        s = influenced_set(g0, apply_change(g0, c), p, c)
        r = run_sync(g0, p, c, ProtocolKind.FOUR_STATE)
        assert r.metrics.broadcasts <= 3 * len(s) + preamble[kind]
        assert r.metrics.adjustments <= len(s)
        changes = sum(len(log.state_changes) for log in r.round_logs)
        assert r.metrics.broadcasts == changes + preamble[kind]
        for v, n in r.ready_exits.items():
            assert n <= 1, f"node {v} left READY {n} times"


def test_stability_check_examples():
    g = Graph.build(nodes=[0, 1], edges=[(0, 1)])
    p = PriorityMap.from_order([0, 1])
    mk = lambda s0, s1: [
        ProtocolNode(0, p[0], s0, {1: (p[1], s1)}),
        ProtocolNode(1, p[1], s1, {0: (p[0], s0)}),
    ]
    assert stability_check(mk(NodeState.IN, NodeState.OUT), 0, g, p)
    assert not stability_check(mk(NodeState.IN, NodeState.PENDING), 0, g, p)
    assert not stability_check(mk(NodeState.IN, NodeState.OUT), 1, g, p)
    # settled but wrong: both endpoints in the set
    assert not stability_check(mk(NodeState.IN, NodeState.IN), 0, g, p)


def test_async_chain_depth_counts_from_change():
    g, p, c = two_in_nodes()
    r = run_async(g, p, c, scheduler_seed=1)
    # announce deliveries are depth 1; the eviction broadcast lands at 2
    assert r.metrics.rounds == 2
