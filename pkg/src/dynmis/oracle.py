"""Sequential reference implementations used as ground truth.

The membership rule maintained everywhere: a node is IN the independent set
exactly when none of its lower-priority visible neighbors is IN. Given a
priority map this rule has a unique fixed point, the greedy assignment, and
every protocol run must land on it.

``influenced_set`` computes the correction cascade a single topology change
sets off, as a level-by-level closure over the stable pre-change states: the
focus node seeds level 0, and a node joins a level when a lower-priority
neighbor sits in the previous one (for a node currently OUT, additionally
once every IN node below it has been absorbed). Nodes can recur at several
levels; only cascade members may act during a protocol run, and the number
of output changes is bounded by the cascade size. ``influence_if_first``
runs the same closure with the focus pinned to the front of the order; its
membership does not depend on where the focus actually sits, which makes it
the analysis envelope for the influenced set.
"""

from __future__ import annotations

import math
import random
import statistics
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .graph import (
    ChangeKind,
    DELETE_KINDS,
    Graph,
    Locus,
    NodeId,
    PriorityMap,
    TopologyChange,
    apply_change,
    locus,
    mix64,
)

# An assignment maps each visible node to True (IN the set) or False (OUT).
MisAssignment = dict[NodeId, bool]

IN = True
OUT = False


class AssignmentError(ValueError):
    """Assignment does not cover the visible nodes of the graph."""


def _greedy_by_rank(g: Graph, rank: Callable[[NodeId], tuple]) -> MisAssignment:
    state: MisAssignment = {}
    adj = g.adjacency
    for v in sorted(g.visible_nodes(), key=rank):
        # neighbors not yet processed (higher rank, or muted) miss state
        state[v] = not any(state.get(u) for u in adj[v])
    return state


def greedy_mis(g: Graph, p: PriorityMap) -> MisAssignment:
    """The unique assignment satisfying the membership rule under p.

    Equivalent to inspecting visible nodes in increasing priority and adding
    each unless a lower neighbor was already added.
    """
    return _greedy_by_rank(g, p.__getitem__)


def check_invariant(g: Graph, p: PriorityMap, a: MisAssignment) -> bool:
    """True iff every visible node satisfies the membership rule.

    A True result implies ``a`` is a maximal independent set of the visible
    graph. Raises :class:`AssignmentError` if a visible node is missing.
    """
    vis = g.visible
    adj = g.adjacency
    for v, visible in vis.items():
        if not visible:
            continue
        if v not in a:
            raise AssignmentError(f"assignment missing node {v}")
        pv = p[v]
        has_lower_in = any(a[u] for u in adj[v] if vis[u] and p[u] < pv)
        if a[v] == has_lower_in:
            return False
    return True


@dataclass
class InfluencedSet:
    """Nodes reached by the correction cascade of one change.

    The recursion runs over the stable pre-change states: the focus node
    seeds level 0; at each level, a node joins when some lower-priority
    neighbor belongs to the previous level (the trigger) and, if it was OUT,
    every IN node below it has already been absorbed. A node may recur at
    several levels (it is told to wait for the latest); ``level`` keeps the
    last one and ``times_seen`` the recurrence count. ``invariant_held``
    marks the empty result: the change left the focus satisfied.
    """

    members: set[NodeId] = field(default_factory=set)
    level: dict[NodeId, int] = field(default_factory=dict)
    times_seen: dict[NodeId, int] = field(default_factory=dict)
    invariant_held: bool = False

    def __len__(self) -> int:
        return len(self.members)


def _visible_adjacency(g: Graph) -> dict[NodeId, list[NodeId]]:
    vis = g.visible
    return {v: [u for u in nbrs if vis[u]] for v, nbrs in g.adjacency.items() if vis[v]}


def _run_closure(
    adj: dict[NodeId, list[NodeId]],
    rank: Callable[[NodeId], tuple],
    states: MisAssignment,
    seed_node: NodeId,
) -> InfluencedSet:
    """Triggered closure from the seed. ``states`` are the static
    pre-change states; the seed's own state is never consulted."""
    out = InfluencedSet()
    out.members.add(seed_node)
    out.level[seed_node] = 0
    out.times_seen[seed_node] = 1
    covered = {seed_node}
    frontier = [seed_node]
    bound = len(adj) + 1  # trigger chains climb strictly in rank
    wave = 0
    while frontier:
        wave += 1
        assert wave <= bound, "closure failed to terminate"
        candidates: set[NodeId] = set()
        for x in frontier:
            rx = rank(x)
            for u in adj[x]:
                if rank(u) > rx:
                    candidates.add(u)
        joined: list[NodeId] = []
        for u in candidates:
            if states.get(u):
                joined.append(u)  # an IN node reacts to any trigger below
            else:
                ru = rank(u)
                if all(
                    w in covered
                    for w in adj[u]
                    if rank(w) < ru and states.get(w)
                ):
                    joined.append(u)
        for u in joined:
            out.members.add(u)
            out.level[u] = wave
            out.times_seen[u] = out.times_seen.get(u, 0) + 1
            covered.add(u)
        frontier = joined
    return out


def change_breaks_focus(
    g_old: Graph,
    g_new: Graph,
    p: PriorityMap,
    c: TopologyChange,
    old_state: MisAssignment,
    loc: Locus,
) -> bool:
    """Whether the change violates the membership rule at the focus: a kept
    node whose rule flips, a deleted IN node, or an arriving node that must
    enter (no lower IN neighbor)."""
    focus = loc.focus
    if c.kind in DELETE_KINDS:
        return bool(old_state[focus])
    pre = (
        OUT
        if c.kind in (ChangeKind.NODE_INSERT, ChangeKind.NODE_UNMUTE)
        else old_state[focus]
    )
    pf = p[focus]
    vis = g_new.visible
    desired = not any(
        old_state[u] for u in g_new.adjacency[focus] if vis[u] and p[u] < pf
    )
    return desired != pre


def influenced_set(
    g_old: Graph,
    g_new: Graph,
    p: PriorityMap,
    c: TopologyChange,
    old_state: MisAssignment | None = None,
) -> InfluencedSet:
    """The set of nodes drawn into the correction cascade of change ``c``,
    with the level at which each is last reached.

    ``old_state`` must be the stable pre-change assignment (computed when
    omitted). The recursion runs on the new graph, except node deletions run
    on the old graph (the focus stands in for its own absence). Empty
    exactly when the change leaves the focus satisfied.
    """
    if old_state is None:
        old_state = greedy_mis(g_old, p)
    if c.kind is ChangeKind.NODE_INSERT and c.muted:
        # an invisible arrival changes nothing until it is unmuted
        return InfluencedSet(invariant_held=True)
    loc = locus(g_old, g_new, p, c)
    if not change_breaks_focus(g_old, g_new, p, c, old_state, loc):
        return InfluencedSet(invariant_held=True)
    graph = g_old if c.kind in DELETE_KINDS else g_new
    adj = _visible_adjacency(graph)
    return _run_closure(adj, p.__getitem__, old_state, loc.focus)


def influence_if_first(
    g_old: Graph,
    g_new: Graph,
    p: PriorityMap,
    c: TopologyChange,
    old_state: MisAssignment | None = None,
) -> InfluencedSet:
    """The correction cascade with the focus pinned to the very front of the
    order and forced to react; never empty.

    Same triggered closure over the stable pre-change states, but ranked by
    the pinned order, and run on the old graph for node deletions and edge
    insertions (on the new graph otherwise). The pinned order ignores the
    focus's true draw, so membership carries no information about where the
    focus really sits relative to the rest.
    """
    if c.kind is ChangeKind.NODE_INSERT and c.muted:
        raise ValueError("influence is undefined for a muted insertion")
    if old_state is None:
        old_state = greedy_mis(g_old, p)
    loc = locus(g_old, g_new, p, c)
    focus = loc.focus

    front = (-1, -1)

    def rank(v: NodeId, _focus=focus, _p=p) -> tuple:
        return front if v == _focus else _p[v]

    if c.kind in DELETE_KINDS or c.kind is ChangeKind.EDGE_INSERT:
        graph = g_old
    else:
        graph = g_new
    adj = _visible_adjacency(graph)
    return _run_closure(adj, rank, old_state, focus)


def mean_influence_estimate(
    sampler: Callable[[random.Random], tuple[Graph, TopologyChange]],
    trials: int,
    seed: int,
) -> tuple[float, float]:
    """Monte-Carlo estimate of the expected influenced-set size.

    ``sampler`` draws a (graph, change) instance per trial; priorities are
    fresh every trial. Returns (sample mean, standard error).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = random.Random(seed)
    sizes = []
    for t in range(trials):
        g_old, c = sampler(rng)
        p = PriorityMap(mix64(seed + 0x9E3779B97F4A7C15 * (t + 1)))
        g_new = apply_change(g_old, c)
        sizes.append(len(influenced_set(g_old, g_new, p, c)))
    mean = statistics.fmean(sizes)
    if trials == 1:
        return mean, 0.0
    return mean, statistics.stdev(sizes) / math.sqrt(trials)


MAX_PARTITION_NODES = 12


def cc_partition_cost(g: Graph, blocks: Iterable[Iterable[NodeId]]) -> int:
    """Clustering objective: missing intra-block pairs plus present
    cross-block edges, over visible nodes."""
    adj = g.adjacency
    intra_edges = 0
    missing = 0
    for block in blocks:
        block = list(block)
        n = len(block)
        e = 0
        bset = set(block)
        for v in block:
            e += sum(1 for u in adj[v] if u in bset)
        e //= 2
        intra_edges += e
        missing += n * (n - 1) // 2 - e
    total_edges = len(g.edges())
    return missing + (total_edges - intra_edges)


def brute_force_cc_opt(g: Graph) -> int:
    """Minimum clustering cost over all partitions of the visible nodes.

    Enumerates set partitions via restricted-growth strings; refuses graphs
    with more than 12 visible nodes.
    """
    nodes = sorted(g.visible_nodes())
    n = len(nodes)
    if n > MAX_PARTITION_NODES:
        raise ValueError(f"graph too large for partition enumeration: {n} nodes")
    if n == 0:
        return 0
    best = math.inf
    # restricted-growth string: code[i] <= max(code[:i]) + 1
    code = [0] * n
    maxes = [0] * n
    while True:
        blocks: dict[int, list[NodeId]] = {}
        for v, b in zip(nodes, code):
            blocks.setdefault(b, []).append(v)
        cost = cc_partition_cost(g, blocks.values())
        if cost < best:
            best = cost
        i = n - 1
        while i > 0:
            if code[i] <= maxes[i - 1]:
                code[i] += 1
                m = max(maxes[i - 1], code[i])
                for j in range(i, n):
                    maxes[j] = m
                    if j > i:
                        code[j] = 0
                break
            i -= 1
        else:
            return int(best)
