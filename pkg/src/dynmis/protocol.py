"""Node-local programs run by the engine.

Two protocols share the same bootstrap plans:

* the direct template: on every delivery a node recomputes its membership
  from its neighbor table and broadcasts whenever its IN/OUT output changes
  (a node may flip several times before the system settles);
* the four-state machine: IN and OUT plus PENDING (the node has learned it
  may have to change) and READY (cleared to change). A PENDING node must
  hold for at least two rounds and until no higher-priority neighbor is
  PENDING; a READY node settles once every lower-priority neighbor is back
  in IN/OUT, choosing IN exactly when all of them are OUT. Every state
  change is broadcast, so each affected node costs at most three broadcasts
  in a single-seeded run.

All decisions read only the node's own table, which is updated exclusively
by delivered broadcasts and by topology notices from the engine; nodes never
peek at global state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .graph import (
    ChangeKind,
    Graph,
    NodeId,
    Priority,
    PriorityMap,
    TopologyChange,
    locus,
)
from .oracle import MisAssignment


class NodeState(str, Enum):
    IN = "in"
    OUT = "out"
    PENDING = "pending"
    READY = "ready"


SETTLED = (NodeState.IN, NodeState.OUT)


class ProtocolKind(str, Enum):
    TEMPLATE = "template"
    FOUR_STATE = "four-state"


@dataclass(slots=True)
class BroadcastMsg:
    """One broadcast: (sender, its priority, its state). Heard by every
    current communication neighbor of the sender."""

    sender: NodeId
    priority: Priority
    state: NodeState


@dataclass(slots=True)
class ProtocolNode:
    """Local view of one node: its own priority and state plus a table of
    known visible neighbors. ``pending_since`` is the round of the last
    PENDING broadcast. ``departing`` marks a gracefully deleted node, which
    still runs the machine but settles OUT and retires at stability."""

    id: NodeId
    priority: Priority
    state: NodeState
    table: dict[NodeId, tuple[Priority, NodeState]] = field(default_factory=dict)
    pending_since: int | None = None
    departing: bool = False

    def absorb(self, msgs: list[BroadcastMsg]) -> set[NodeId]:
        """Fold delivered broadcasts into the table. Returns the set of
        lower-priority neighbors seen switching into PENDING just now."""
        newly_pending: set[NodeId] = set()
        for m in msgs:
            prev = self.table.get(m.sender)
            self.table[m.sender] = (m.priority, m.state)
            if (
                m.state is NodeState.PENDING
                and (prev is None or prev[1] is not NodeState.PENDING)
                and m.priority < self.priority
            ):
                newly_pending.add(m.sender)
        return newly_pending

    def wants_membership(self) -> bool:
        """Membership rule against the table: IN iff no known lower
        neighbor is IN."""
        pv = self.priority
        return not any(
            st is NodeState.IN for pr, st in self.table.values() if pr < pv
        )

    def make_msg(self) -> BroadcastMsg:
        return BroadcastMsg(self.id, self.priority, self.state)


def template_react(node: ProtocolNode) -> BroadcastMsg | None:
    """Recompute membership from the table; broadcast iff the output flips."""
    desired = NodeState.IN if node.wants_membership() else NodeState.OUT
    if desired is node.state:
        return None
    node.state = desired
    return node.make_msg()


def four_state_react(
    node: ProtocolNode, round_index: int, newly_pending: set[NodeId]
) -> BroadcastMsg | None:
    """Apply the four transition rules; at most one transition per round.

    ``newly_pending`` holds the lower neighbors whose switch to PENDING was
    delivered this round (the rule triggers are edge-triggered; all other
    conditions are levels read from the table).
    """
    st = node.state
    if st is NodeState.IN:
        if newly_pending:
            node.state = NodeState.PENDING
            node.pending_since = round_index
            return node.make_msg()
        return None
    if st is NodeState.OUT:
        # a lower neighbor just turned PENDING and no other lower one is
        # still IN: this node may have lost its last reason to stay OUT
        if newly_pending and not any(
            s is NodeState.IN for pr, s in node.table.values() if pr < node.priority
        ):
            node.state = NodeState.PENDING
            node.pending_since = round_index
            return node.make_msg()
        return None
    if st is NodeState.PENDING:
        # hold at least two rounds, and yield to higher PENDING neighbors
        if round_index - node.pending_since < 2:
            return None
        if any(
            s is NodeState.PENDING for pr, s in node.table.values() if pr > node.priority
        ):
            return None
        node.state = NodeState.READY
        return node.make_msg()
    # READY: settle once every lower neighbor is back in IN/OUT
    lower = [s for pr, s in node.table.values() if pr < node.priority]
    if any(s not in SETTLED for s in lower):
        return None
    if node.departing:
        node.state = NodeState.OUT  # a leaving node announces OUT, never rejoins
    else:
        node.state = (
            NodeState.IN
            if all(s is NodeState.OUT for s in lower)
            else NodeState.OUT
        )
    node.pending_since = None
    return node.make_msg()


@dataclass(frozen=True)
class BootstrapAction:
    """Scripted step that kicks off a change before the free-running rules
    take over.

    ops:
      announce       sender broadcasts its (priority, state) once
      intro          a new or unmuted node broadcasts (priority, OUT)
      evaluate       node checks its membership rule and reacts if violated
      depart         gracefully deleted node enters PENDING and broadcasts
    """

    round: int
    op: str
    node: NodeId


def init_change(
    g_old: Graph,
    g_new: Graph,
    p: PriorityMap,
    c: TopologyChange,
    old_state: MisAssignment,
) -> list[BootstrapAction]:
    """Per-change bootstrap schedule.

    Edge insertion: both endpoints announce, then the higher one evaluates.
    Node insertion: the newcomer introduces itself, neighbors announce back,
    then it evaluates. Deletions and unmuting need no info exchange: the
    affected nodes evaluate directly, except a gracefully deleted IN node,
    which itself announces the change by entering PENDING. An abrupt
    deletion seeds every broken neighbor at once.
    """
    k = c.kind
    if k is ChangeKind.EDGE_INSERT:
        focus, companion = locus(g_old, g_new, p, c)
        return [
            BootstrapAction(1, "announce", companion),
            BootstrapAction(1, "announce", focus),
            BootstrapAction(2, "evaluate", focus),
        ]
    if k in (ChangeKind.EDGE_DELETE_GRACEFUL, ChangeKind.EDGE_DELETE_ABRUPT):
        focus, _ = locus(g_old, g_new, p, c)
        return [BootstrapAction(1, "evaluate", focus)]
    if k is ChangeKind.NODE_INSERT:
        if c.muted:
            return []  # invisible arrival: nobody is told anything
        plan = [BootstrapAction(1, "intro", c.v)]
        plan.extend(BootstrapAction(2, "announce", u) for u in sorted(c.neighbors))
        plan.append(BootstrapAction(3, "evaluate", c.v))
        return plan
    if k is ChangeKind.NODE_DELETE_GRACEFUL:
        if old_state.get(c.v):
            return [BootstrapAction(1, "depart", c.v)]
        return []
    if k is ChangeKind.NODE_DELETE_ABRUPT:
        vis = g_old.visible
        nbrs = sorted(u for u in g_old.adjacency[c.v] if vis[u])
        return [BootstrapAction(1, "evaluate", u) for u in nbrs]
    if k is ChangeKind.NODE_UNMUTE:
        return [
            BootstrapAction(1, "intro", c.v),
            BootstrapAction(2, "evaluate", c.v),
        ]
    raise ValueError(f"unhandled change kind {k}")  # pragma: no cover
