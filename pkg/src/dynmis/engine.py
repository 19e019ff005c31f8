"""Schedulers, broadcast delivery, stability detection, metric accounting.

One engine run covers exactly one topology change starting from a stable
configuration. The synchronous scheduler is lock-step: everything broadcast
in round t is heard in round t+1. The asynchronous scheduler delivers
messages one at a time in a seeded random admissible order (FIFO per ordered
node pair) and reports the longest causal chain instead of a round count.

The engine is the omniscient observer: it detects stability, removes
gracefully deleted nodes once the system has settled, and verifies the final
configuration against the sequential reference.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .graph import (
    ChangeKind,
    Graph,
    NodeId,
    PriorityMap,
    TopologyChange,
    apply_change,
)
from .oracle import MisAssignment, check_invariant, greedy_mis
from .protocol import (
    BootstrapAction,
    BroadcastMsg,
    NodeState,
    ProtocolKind,
    ProtocolNode,
    SETTLED,
    four_state_react,
    init_change,
    template_react,
)


class ProtocolError(RuntimeError):
    """The run exceeded its safety budget or settled on a wrong
    configuration; either way a bug, not a recoverable condition."""


@dataclass
class RoundLog:
    round: int
    broadcasts: list[BroadcastMsg] = field(default_factory=list)
    state_changes: list[tuple[NodeId, NodeState, NodeState]] = field(default_factory=list)


@dataclass
class ChangeMetrics:
    """Cost of one change: nodes whose stable output changed, rounds until
    stability (longest causal chain when asynchronous), total broadcasts
    including bootstrap announcements."""

    adjustments: int
    rounds: int
    broadcasts: int


@dataclass
class RunResult:
    assignment: MisAssignment
    metrics: ChangeMetrics
    round_logs: list[RoundLog]
    graph: Graph
    pending_entries: dict[NodeId, int] = field(default_factory=dict)
    ready_exits: dict[NodeId, int] = field(default_factory=dict)


def stability_check(
    nodes: Iterable[ProtocolNode],
    undelivered: int,
    g: Graph,
    p: PriorityMap,
) -> bool:
    """True iff every node is settled, nothing is in flight, and the settled
    outputs satisfy the membership rule on the visible graph."""
    states: MisAssignment = {}
    for node in nodes:
        if node.state not in SETTLED:
            return False
        if not node.departing and g.is_visible(node.id):
            states[node.id] = node.state is NodeState.IN
    if undelivered:
        return False
    if set(states) != set(g.visible_nodes()):
        return False
    return check_invariant(g, p, states)


class _Run:
    """Shared per-run state: lazy node views, communication topology,
    bookkeeping. Nodes materialize on first contact with a snapshot of the
    stable pre-change state; deliveries are the only way their tables
    diverge from it afterwards, so late materialization never misses
    information."""

    def __init__(
        self,
        g_old: Graph,
        g_new: Graph,
        p: PriorityMap,
        c: TopologyChange,
        old: MisAssignment,
    ):
        self.g_old = g_old
        self.g_new = g_new
        self.p = p
        self.change = c
        self.old = old
        self.nodes: dict[NodeId, ProtocolNode] = {}
        self.pending_entries: dict[NodeId, int] = {}
        self.ready_exits: dict[NodeId, int] = {}
        self.broadcasts = 0

        k = c.kind
        self.departed: NodeId | None = c.v if k is ChangeKind.NODE_DELETE_GRACEFUL else None
        self.dropped: NodeId | None = c.v if k is ChangeKind.NODE_DELETE_ABRUPT else None
        self.newcomer: NodeId | None = (
            c.v if k in (ChangeKind.NODE_INSERT, ChangeKind.NODE_UNMUTE) else None
        )
        cut = None
        if k in (ChangeKind.EDGE_DELETE_GRACEFUL, ChangeKind.EDGE_DELETE_ABRUPT):
            cut = (c.u, c.v)
        self.cut_edge = cut

        # who hears whom while the run is in flight: the new topology, plus
        # the graceful deletee's old edges, plus a gracefully deleted edge
        comm: dict[NodeId, list[NodeId]] = {}
        vis = g_new.visible
        for v, nbrs in g_new.adjacency.items():
            if vis[v]:
                comm[v] = sorted(u for u in nbrs if vis[u])
        if self.departed is not None and old.get(self.departed):
            ghost = sorted(u for u in g_old.adjacency[self.departed] if g_old.visible[u])
            comm[self.departed] = ghost
            for u in ghost:
                comm[u].append(self.departed)
        if k is ChangeKind.EDGE_DELETE_GRACEFUL:
            comm[c.u].append(c.v)
            comm[c.v].append(c.u)
        self.comm = comm

    def snapshot_neighbors(self, v: NodeId) -> list[NodeId]:
        """What v already knows when first touched: its stable-time visible
        neighborhood, minus whatever the change removed. New edges and nodes
        are learned only through announcements."""
        if v == self.newcomer and self.change.kind is ChangeKind.NODE_UNMUTE:
            # it listened while muted, so its table is current
            vis = self.g_new.visible
            return sorted(u for u in self.g_new.adjacency[v] if vis[u] and u != v)
        if not self.g_old.has_node(v):
            return []
        vis = self.g_old.visible
        base = [u for u in self.g_old.adjacency[v] if vis[u]]
        if self.cut_edge is not None and v in self.cut_edge:
            other = self.cut_edge[0] if v == self.cut_edge[1] else self.cut_edge[1]
            base = [u for u in base if u != other]
        if self.dropped is not None:
            base = [u for u in base if u != self.dropped]
        return sorted(base)

    def node(self, v: NodeId) -> ProtocolNode:
        n = self.nodes.get(v)
        if n is None:
            if v == self.newcomer:
                state = NodeState.OUT  # provisional state of an arriving node
            else:
                state = NodeState.IN if self.old[v] else NodeState.OUT
            table = {
                u: (self.p[u], NodeState.IN if self.old[u] else NodeState.OUT)
                for u in self.snapshot_neighbors(v)
            }
            n = ProtocolNode(id=v, priority=self.p[v], state=state, table=table)
            self.nodes[v] = n
        return n

    def finish(self, rounds: int, validate: bool, logs: list[RoundLog]) -> RunResult:
        assignment = dict(self.old)
        for v, node in self.nodes.items():
            if node.state not in SETTLED:
                raise ProtocolError(f"node {v} not settled at termination")
            if node.departing:
                continue
            assignment[v] = node.state is NodeState.IN
        if self.departed is not None:
            assignment.pop(self.departed, None)
        if self.dropped is not None:
            assignment.pop(self.dropped, None)
        if validate:
            expected = set(self.g_new.visible_nodes())
            if set(assignment) != expected:
                raise ProtocolError("assignment does not cover the visible nodes")
            if not check_invariant(self.g_new, self.p, assignment):
                raise ProtocolError("terminal configuration violates the membership rule")
        adjustments = sum(
            1 for v, s in assignment.items() if v in self.old and self.old[v] != s
        )
        metrics = ChangeMetrics(adjustments, rounds, self.broadcasts)
        return RunResult(
            assignment,
            metrics,
            logs,
            self.g_new,
            self.pending_entries,
            self.ready_exits,
        )


def _note_transition(run: _Run, v: NodeId, new_state: NodeState, prev: NodeState) -> None:
    if new_state is NodeState.PENDING:
        run.pending_entries[v] = run.pending_entries.get(v, 0) + 1
    if prev is NodeState.READY:
        run.ready_exits[v] = run.ready_exits.get(v, 0) + 1


def run_sync(
    g_old: Graph,
    p: PriorityMap,
    c: TopologyChange,
    kind: ProtocolKind = ProtocolKind.FOUR_STATE,
    *,
    start: MisAssignment | None = None,
    max_rounds: int | None = None,
    validate: bool = True,
) -> RunResult:
    """Run one change to stability under lock-step rounds.

    ``start`` is the stable pre-change assignment (computed when omitted).
    Terminates when a full round passes with nothing delivered, nothing
    scripted, and every node settled; exceeding ``max_rounds`` (default
    3n + 10) raises :class:`ProtocolError`.
    """
    g_new = apply_change(g_old, c)
    old = start if start is not None else greedy_mis(g_old, p)
    run = _Run(g_old, g_new, p, c, old)
    plan = init_change(g_old, g_new, p, c, old)
    actions: dict[int, list[BootstrapAction]] = {}
    for act in plan:
        actions.setdefault(act.round, []).append(act)
    last_action_round = max(actions) if actions else 0
    if max_rounds is None:
        max_rounds = 3 * max(len(g_new), 1) + 10

    four_state = kind is ProtocolKind.FOUR_STATE
    inbox: dict[NodeId, list[BroadcastMsg]] = {}
    restless: set[NodeId] = set()
    logs: list[RoundLog] = []
    last_send_round = 0
    rnd = 0

    def send(node: ProtocolNode, log: RoundLog) -> None:
        nonlocal last_send_round
        msg = node.make_msg()
        run.broadcasts += 1
        last_send_round = rnd
        log.broadcasts.append(msg)
        for r in run.comm.get(node.id, ()):
            inbox.setdefault(r, []).append(msg)

    while True:
        if not inbox and rnd >= last_action_round and not restless:
            break
        rnd += 1
        if rnd > max_rounds:
            raise ProtocolError(f"no stability after {max_rounds} rounds for {c}")
        deliveries, inbox = inbox, {}
        log = RoundLog(rnd)
        triggers: dict[NodeId, set[NodeId]] = {}
        for v in sorted(deliveries):
            newly = run.node(v).absorb(deliveries[v])
            if newly:
                triggers[v] = newly

        handled: set[NodeId] = set()
        for act in actions.pop(rnd, ()):
            v = act.node
            node = run.node(v)
            if act.op == "announce":
                send(node, log)
                continue
            handled.add(v)
            prev = node.state
            if act.op == "intro":
                send(node, log)  # (priority, provisional OUT)
                continue
            if act.op == "depart":
                node.departing = True
                node.state = NodeState.PENDING if four_state else NodeState.OUT
                node.pending_since = rnd
                _note_transition(run, v, node.state, prev)
                log.state_changes.append((v, prev, node.state))
                send(node, log)
                if four_state:
                    restless.add(v)
                continue
            # evaluate: react if the membership rule is violated locally
            if four_state:
                if node.state in SETTLED:
                    desired = node.wants_membership()
                    if (node.state is NodeState.IN) != desired:
                        node.state = NodeState.PENDING
                        node.pending_since = rnd
                        _note_transition(run, v, node.state, prev)
                        log.state_changes.append((v, prev, node.state))
                        send(node, log)
                        restless.add(v)
            else:
                msg = template_react(node)
                if msg is not None:
                    log.state_changes.append((v, prev, node.state))
                    send(node, log)

        for v in sorted(set(deliveries) | restless):
            if v in handled:
                continue
            node = run.nodes[v]
            if node.departing and node.state is NodeState.OUT:
                continue  # a retired node never rejoins
            prev = node.state
            if four_state:
                msg = four_state_react(node, rnd, triggers.get(v, set()))
            else:
                msg = template_react(node)
            if msg is not None:
                _note_transition(run, v, node.state, prev)
                log.state_changes.append((v, prev, node.state))
                send(node, log)
                if node.state in SETTLED:
                    restless.discard(v)
                else:
                    restless.add(v)
        if four_state:
            # two adjacent nodes may never clear PENDING in the same round:
            # the lower one still sees the higher as PENDING in its table
            cleared = [v for v, _, b in log.state_changes if b is NodeState.READY]
            for i, a in enumerate(cleared):
                for b in cleared[i + 1 :]:
                    assert b not in run.comm.get(a, ()), (
                        f"adjacent nodes {a} and {b} cleared PENDING together"
                    )
        if log.broadcasts or log.state_changes:
            logs.append(log)

    return run.finish(last_send_round, validate, logs)


def run_async(
    g_old: Graph,
    p: PriorityMap,
    c: TopologyChange,
    scheduler_seed: int,
    *,
    start: MisAssignment | None = None,
    max_events: int | None = None,
    validate: bool = True,
) -> RunResult:
    """Run one change to quiescence with one-at-a-time message delivery.

    Template protocol only. Deliveries are picked uniformly among ordered
    node pairs with queued messages, FIFO within a pair. The rounds metric
    reports the longest causal chain, counting the triggering change as
    depth 0.
    """
    g_new = apply_change(g_old, c)
    old = start if start is not None else greedy_mis(g_old, p)
    run = _Run(g_old, g_new, p, c, old)
    if max_events is None:
        max_events = 50 * (len(g_new) + 2) ** 2 + 200

    queues: dict[tuple[NodeId, NodeId], deque] = {}
    pairs: list[tuple[NodeId, NodeId]] = []
    pos: dict[tuple[NodeId, NodeId], int] = {}
    rng = random.Random(scheduler_seed)
    max_depth = 0

    def send(node: ProtocolNode, depth: int) -> None:
        run.broadcasts += 1
        msg = node.make_msg()
        for r in run.comm.get(node.id, ()):
            key = (node.id, r)
            q = queues.get(key)
            if q is None:
                q = queues[key] = deque()
            q.append((msg, depth))
            if key not in pos:
                pos[key] = len(pairs)
                pairs.append(key)

    def react(v: NodeId, depth: int) -> None:
        node = run.node(v)
        if template_react(node) is not None:
            send(node, depth + 1)

    # bootstrap: local knowledge of the change, no rounds involved
    k = c.kind
    awaiting: set[NodeId] = set()
    replied: set[NodeId] = set()
    if k is ChangeKind.EDGE_INSERT:
        send(run.node(c.u), 0)  # endpoints announce themselves
        send(run.node(c.v), 0)
    elif k in (ChangeKind.EDGE_DELETE_GRACEFUL, ChangeKind.EDGE_DELETE_ABRUPT):
        react(c.u, -1)
        react(c.v, -1)
    elif k is ChangeKind.NODE_INSERT:
        if not c.muted:
            node = run.node(c.v)
            awaiting = set(c.neighbors)
            send(node, 0)
            if not awaiting:
                react(c.v, -1)
    elif k is ChangeKind.NODE_DELETE_GRACEFUL:
        if old[c.v]:
            node = run.node(c.v)
            node.departing = True
            node.state = NodeState.OUT
            send(node, 0)
    elif k is ChangeKind.NODE_DELETE_ABRUPT:
        for u in sorted(u for u in g_old.adjacency[c.v] if g_old.visible[u]):
            react(u, -1)
    elif k is ChangeKind.NODE_UNMUTE:
        node = run.node(c.v)
        if node.wants_membership():
            node.state = NodeState.IN
        send(node, 0)

    events = 0
    while pairs:
        events += 1
        if events > max_events:
            raise ProtocolError(f"no quiescence after {max_events} deliveries for {c}")
        i = rng.randrange(len(pairs))
        key = pairs[i]
        msg, depth = queues[key].popleft()
        if not queues[key]:
            last = pairs.pop()
            del pos[key]
            if last != key:
                pairs[i] = last
                pos[last] = i
        _, recipient = key
        delivered_depth = depth + 1
        if delivered_depth > max_depth:
            max_depth = delivered_depth
        node = run.node(recipient)
        node.absorb([msg])
        if node.departing:
            continue  # a retired node only listens
        if k is ChangeKind.NODE_INSERT and msg.sender == c.v and recipient not in replied:
            replied.add(recipient)
            send(node, delivered_depth)  # introduce itself to the newcomer
        if awaiting and recipient == c.v and msg.sender in awaiting:
            awaiting.discard(msg.sender)
            if awaiting:
                continue  # evaluate only once the whole neighborhood replied
        if template_react(node) is not None:
            send(node, delivered_depth)

    return run.finish(max_depth, validate, [])
