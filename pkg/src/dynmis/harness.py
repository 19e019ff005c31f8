"""Scenario files, generators, baselines, statistics, and the demonstration
experiments driven by the command line.

A scenario file is JSON Lines: one topology change per line, starting from
the empty graph, e.g.

    {"op": "node_insert", "v": 0, "nbrs": []}
    {"op": "node_insert", "v": 1, "nbrs": [0], "muted": true}
    {"op": "edge_insert", "u": 0, "v": 2}
    {"op": "node_unmute", "v": 1}
    {"op": "node_delete_abrupt", "v": 2}

Each trial replays all changes with stabilization in between and fresh
node priorities; per-change metrics go to CSV with columns
(scenario, trial, change_idx, change_type, adjustments, rounds, broadcasts,
S_size).
"""

from __future__ import annotations

import csv
import json
import math
import random
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .engine import run_async, run_sync
from .graph import (
    ChangeKind,
    Graph,
    InvalidChange,
    MalformedChange,
    NodeId,
    PriorityMap,
    TopologyChange,
    apply_change,
    edge_delete_abrupt,
    edge_delete_graceful,
    edge_insert,
    mix64,
    node_delete_abrupt,
    node_delete_graceful,
    node_insert,
    node_unmute,
)
from .oracle import MisAssignment, greedy_mis, influenced_set
from .protocol import ProtocolKind

CSV_COLUMNS = (
    "scenario",
    "trial",
    "change_idx",
    "change_type",
    "adjustments",
    "rounds",
    "broadcasts",
    "S_size",
)


class ScenarioError(ValueError):
    """Scenario is malformed or a change is invalid mid-sequence."""


@dataclass
class Scenario:
    name: str
    changes: list[TopologyChange]
    initial_graph: Graph = field(default_factory=Graph)
    seeds: list[int] = field(default_factory=list)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    changes = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ScenarioError(f"{path}:{lineno}: not JSON: {exc}") from exc
            try:
                changes.append(TopologyChange.from_dict(record))
            except MalformedChange as exc:
                raise ScenarioError(f"{path}:{lineno}: {exc}") from exc
    return Scenario(name=path.stem, changes=changes)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for c in scenario.changes:
            fh.write(json.dumps(c.to_dict()) + "\n")


def validate_scenario(scenario: Scenario) -> None:
    """Dry-run all changes for structural validity, including the rule that
    node ids are never reused after a deletion."""
    g = scenario.initial_graph.copy()
    used = set(g.adjacency)
    for idx, c in enumerate(scenario.changes):
        if c.kind is ChangeKind.NODE_INSERT:
            if c.v in used:
                raise ScenarioError(
                    f"change {idx}: node id {c.v} reused after deletion"
                )
            used.add(c.v)
        try:
            g = apply_change(g, c)
        except InvalidChange as exc:
            raise ScenarioError(f"change {idx}: {exc}") from exc


@dataclass
class ChangeRecord:
    scenario: str
    trial: int
    change_idx: int
    change_type: str
    adjustments: int
    rounds: int
    broadcasts: int
    s_size: int

    def row(self) -> list:
        return [
            self.scenario,
            self.trial,
            self.change_idx,
            self.change_type,
            self.adjustments,
            self.rounds,
            self.broadcasts,
            self.s_size,
        ]


def _mean_se_max(xs: Sequence[float]) -> tuple[float, float, float]:
    if not xs:
        return 0.0, 0.0, 0.0
    m = statistics.fmean(xs)
    se = statistics.stdev(xs) / math.sqrt(len(xs)) if len(xs) > 1 else 0.0
    return m, se, max(xs)


@dataclass
class TrialStats:
    """Per-change records plus aggregates recomputable from them."""

    records: list[ChangeRecord] = field(default_factory=list)
    final_mis_sizes: list[int] = field(default_factory=list)

    def aggregates(self) -> dict[str, tuple[float, float, float]]:
        return {
            metric: _mean_se_max([getattr(r, metric) for r in self.records])
            for metric in ("adjustments", "rounds", "broadcasts", "s_size")
        }

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in self.records:
                w.writerow(r.row())


def trial_seed(base: int, trial: int) -> int:
    return mix64(base + 0x9E3779B97F4A7C15 * (trial + 1))


def run_scenario(
    scenario: Scenario,
    kind: ProtocolKind = ProtocolKind.FOUR_STATE,
    mode: str = "sync",
    trials: int = 1,
    seed: int = 0,
    out_csv: str | Path | None = None,
    debug_rounds: str | Path | None = None,
    with_oracle: bool = True,
) -> TrialStats:
    """Execute all changes with stabilization between each, fresh priorities
    per trial. Re-validates the membership rule after every change; any
    violation aborts the run.

    ``with_oracle`` also records the influenced-set size per change
    (computed by the sequential reference, column S_size; -1 when skipped).
    """
    if mode not in ("sync", "async"):
        raise ScenarioError(f"unknown mode {mode!r}")
    if mode == "async" and kind is not ProtocolKind.TEMPLATE:
        raise ScenarioError("asynchronous runs support only the template protocol")
    validate_scenario(scenario)
    stats = TrialStats()
    debug_fh = Path(debug_rounds).open("w") if debug_rounds else None
    try:
        for t in range(trials):
            p = PriorityMap(trial_seed(seed, t))
            g = scenario.initial_graph.copy()
            state: MisAssignment = greedy_mis(g, p)
            for idx, c in enumerate(scenario.changes):
                s_size = -1
                if with_oracle:
                    g_new = apply_change(g, c)
                    s_size = len(influenced_set(g, g_new, p, c, old_state=state))
                if mode == "sync":
                    rr = run_sync(g, p, c, kind, start=state)
                else:
                    rr = run_async(g, p, c, trial_seed(seed ^ 0xA5A5, t * 131071 + idx), start=state)
                if debug_fh is not None:
                    for log in rr.round_logs:
                        debug_fh.write(
                            json.dumps(
                                {
                                    "trial": t,
                                    "change_idx": idx,
                                    "round": log.round,
                                    "broadcasts": [
                                        [m.sender, m.state.value] for m in log.broadcasts
                                    ],
                                    "state_changes": [
                                        [v, a.value, b.value]
                                        for v, a, b in log.state_changes
                                    ],
                                }
                            )
                            + "\n"
                        )
                stats.records.append(
                    ChangeRecord(
                        scenario.name,
                        t,
                        idx,
                        c.kind.value,
                        rr.metrics.adjustments,
                        rr.metrics.rounds,
                        rr.metrics.broadcasts,
                        s_size,
                    )
                )
                g, state = rr.graph, rr.assignment
            stats.final_mis_sizes.append(sum(state.values()))
    finally:
        if debug_fh is not None:
            debug_fh.close()
    if out_csv:
        stats.write_csv(out_csv)
    return stats


def deterministic_baseline(g: Graph, c: TopologyChange) -> MisAssignment:
    """A natural deterministic maintainer: the greedy set under the fixed
    node-id order, recomputed on the post-change graph. Used only for the
    separation demonstration."""
    return greedy_mis(apply_change(g, c), PriorityMap.identity())


def run_deterministic_sequence(scenario: Scenario) -> list[int]:
    """Adjustment count per change for the deterministic baseline."""
    g = scenario.initial_graph.copy()
    p = PriorityMap.identity()
    state = greedy_mis(g, p)
    out = []
    for c in scenario.changes:
        g = apply_change(g, c)
        new = greedy_mis(g, p)
        out.append(sum(1 for v, s in new.items() if v in state and state[v] != s))
        state = new
    return out


# ---------------------------------------------------------------------------
# scenario generators


def generate_scenario(kind: str, params: dict, seed: int = 0) -> Scenario:
    """Reproducible named scenarios.

    star(n)                one center insert plus n-1 leaf inserts
    three_paths(paths)     per path: 4 node inserts and 3 edge inserts
    bipartite_kk(k)        complete bipartite build, then the k low-id side
                           deleted gracefully one node at a time
    gnp_churn(n, p, steps) random substrate build, then ``steps`` random
                           changes drawn over all seven change types
    """
    rng = random.Random(seed)
    if kind == "star":
        n = int(params.get("n", 10))
        if n < 1:
            raise ScenarioError("star needs n >= 1")
        changes = [node_insert(0)]
        changes += [node_insert(i, [0]) for i in range(1, n)]
        return Scenario(f"star_{n}", changes)
    if kind == "three_paths":
        paths = int(params.get("paths", 4))
        if paths < 1:
            raise ScenarioError("three_paths needs paths >= 1")
        changes: list[TopologyChange] = []
        for i in range(paths):
            base = 4 * i
            changes += [node_insert(base + j) for j in range(4)]
            changes += [edge_insert(base + j, base + j + 1) for j in range(3)]
        return Scenario(f"three_paths_{paths}", changes)
    if kind == "bipartite_kk":
        k = int(params.get("k", 3))
        if k < 1:
            raise ScenarioError("bipartite_kk needs k >= 1")
        left = list(range(k))
        changes = [node_insert(v) for v in left]
        changes += [node_insert(k + i, left) for i in range(k)]
        changes += [node_delete_graceful(v) for v in left]
        return Scenario(f"bipartite_kk_{k}", changes)
    if kind == "gnp_churn":
        n = int(params.get("n", 30))
        p = float(params.get("p", 0.1))
        steps = int(params.get("steps", 100))
        if n < 2 or not 0 < p < 1 or steps < 0:
            raise ScenarioError("gnp_churn needs n >= 2, 0 < p < 1, steps >= 0")
        changes = [node_insert(0)]
        g = Graph.build(nodes=[0])
        for v in range(1, n):
            nbrs = [u for u in range(v) if rng.random() < p]
            changes.append(node_insert(v, nbrs))
            g = apply_change(g, changes[-1])
        next_id = n
        muted_pool: list[NodeId] = []
        for _ in range(steps):
            c = _random_churn_change(g, rng, next_id, muted_pool)
            if c.kind is ChangeKind.NODE_INSERT:
                next_id += 1
                if c.muted:
                    muted_pool.append(c.v)
            elif c.kind is ChangeKind.NODE_UNMUTE:
                muted_pool.remove(c.v)
            changes.append(c)
            g = apply_change(g, c)
        return Scenario(f"gnp_churn_n{n}", changes)
    raise ScenarioError(f"unknown scenario kind {kind!r}")


def _random_churn_change(
    g: Graph, rng: random.Random, next_id: NodeId, muted_pool: list[NodeId]
) -> TopologyChange:
    vis = sorted(g.visible_nodes())
    edges = g.edges()
    frozen = {u for m in muted_pool for u in g.adjacency[m]}
    options: list[str] = ["node_insert"]
    nonedges = []
    if len(vis) >= 2:
        for _ in range(30):
            u, v = rng.sample(vis, 2)
            if not g.has_edge(u, v):
                nonedges.append((min(u, v), max(u, v)))
                break
    if nonedges:
        options.append("edge_insert")
    if edges:
        options += ["edge_delete_graceful", "edge_delete_abrupt"]
    deletable = [v for v in vis if v not in frozen]
    if deletable:
        options += ["node_delete_graceful", "node_delete_abrupt"]
    if muted_pool:
        options += ["node_unmute", "node_unmute"]
    op = rng.choice(options)
    if op == "edge_insert":
        return edge_insert(*nonedges[0])
    if op == "edge_delete_graceful":
        return edge_delete_graceful(*rng.choice(edges))
    if op == "edge_delete_abrupt":
        return edge_delete_abrupt(*rng.choice(edges))
    if op == "node_delete_graceful":
        return node_delete_graceful(rng.choice(deletable))
    if op == "node_delete_abrupt":
        return node_delete_abrupt(rng.choice(deletable))
    if op == "node_unmute":
        return node_unmute(rng.choice(muted_pool))
    nbrs = [u for u in vis if rng.random() < 0.15]
    muted = bool(vis) and rng.random() < 0.15
    return node_insert(next_id, nbrs, muted=muted)


# ---------------------------------------------------------------------------
# (graph, change) samplers for influence statistics


def gnp_graph(n: int, p: float, rng: random.Random) -> Graph:
    g = Graph.build(nodes=range(n))
    # vectorized coin flips; the loop below only walks the hits
    m = n * (n - 1) // 2
    hits = np.flatnonzero(
        np.random.default_rng(rng.getrandbits(63)).random(m) < p
    )
    if len(hits):
        rows = np.arange(n)
        offsets = np.cumsum(rows[::-1][: n - 1])  # row u starts at offsets[u-1]
        starts = np.concatenate(([0], offsets))
        us = np.searchsorted(starts, hits, side="right") - 1
        vs = hits - starts[us] + us + 1
        for u, v in zip(us.tolist(), vs.tolist()):
            g.add_edge(int(u), int(v))
    return g


def star_churn_sampler(n: int = 20) -> Callable[[random.Random], tuple[Graph, TopologyChange]]:
    """Star on n nodes (center 0); one random change per trial."""

    def sample(rng: random.Random) -> tuple[Graph, TopologyChange]:
        g = Graph.build(nodes=range(n), edges=[(0, i) for i in range(1, n)])
        roll = rng.randrange(6)
        if roll == 0:
            return g, node_insert(n, [0])
        if roll == 1:
            return g, node_delete_graceful(rng.randrange(1, n))
        if roll == 2:
            return g, node_delete_abrupt(rng.randrange(1, n))
        if roll == 3:
            return g, node_delete_abrupt(0)
        if roll == 4:
            u, v = rng.sample(range(1, n), 2)
            return g, edge_insert(u, v)
        return g, edge_delete_graceful(0, rng.randrange(1, n))

    return sample


def gnp_edge_churn_sampler(
    n: int = 100, p: float = 0.1, pool: int = 32, pool_seed: int = 0
) -> Callable[[random.Random], tuple[Graph, TopologyChange]]:
    """Random edge insertion or deletion on pre-sampled G(n, p) substrates."""
    base = random.Random(pool_seed)
    graphs = [gnp_graph(n, p, base) for _ in range(pool)]

    def sample(rng: random.Random) -> tuple[Graph, TopologyChange]:
        g = graphs[rng.randrange(len(graphs))]
        if rng.random() < 0.5:
            while True:
                u, v = rng.sample(range(n), 2)
                if not g.has_edge(u, v):
                    return g, edge_insert(u, v)
        edges = g.edges()
        if not edges:
            u, v = rng.sample(range(n), 2)
            return g, edge_insert(u, v)
        kind = edge_delete_graceful if rng.random() < 0.5 else edge_delete_abrupt
        return g, kind(*rng.choice(edges))

    return sample


def kk_deletion_sampler(k: int = 8) -> Callable[[random.Random], tuple[Graph, TopologyChange]]:
    """Complete bipartite K_{k-i,k} after i prior deletions; delete the next
    low-side node."""

    def sample(rng: random.Random) -> tuple[Graph, TopologyChange]:
        i = rng.randrange(k)
        left = list(range(i, k))
        right = list(range(k, 2 * k))
        g = Graph.build(
            nodes=left + right, edges=[(u, v) for u in left for v in right]
        )
        victim = left[0]
        kind = node_delete_graceful if rng.random() < 0.5 else node_delete_abrupt
        return g, kind(victim)

    return sample


def small_node_change_sampler(
    n_lo: int = 4, n_hi: int = 8, p: float = 0.45
) -> Callable[[random.Random], tuple[Graph, TopologyChange]]:
    """Small random graphs with a random node change (insert, delete either
    way, or unmute); the change subject is topology-determined."""

    def sample(rng: random.Random) -> tuple[Graph, TopologyChange]:
        n = rng.randrange(n_lo, n_hi + 1)
        g = Graph.build(nodes=range(n))
        for u in range(n):
            for v in range(u + 1, n):
                if rng.random() < p:
                    g.add_edge(u, v)
        roll = rng.randrange(4)
        if roll == 0:
            nbrs = [u for u in range(n) if rng.random() < 0.5]
            return g, node_insert(n, nbrs)
        if roll == 3:
            victim = rng.randrange(n)
            g.visible[victim] = False
            return g, node_unmute(victim)
        victim = rng.randrange(n)
        kind = node_delete_graceful if roll == 1 else node_delete_abrupt
        return g, kind(victim)

    return sample


# ---------------------------------------------------------------------------
# history independence


def random_constructions(
    target: Graph, count: int, seed: int, transient_fraction: float = 0.2
) -> list[list[TopologyChange]]:
    """Random valid change sequences that each build ``target`` from the
    empty graph. A fraction of them overshoot with a throwaway extra node
    that is deleted again, so the histories genuinely differ."""
    rng = random.Random(seed)
    nodes = sorted(target.adjacency)
    edges = sorted(target.edges())
    fresh = (max(nodes) if nodes else 0) + 1
    sequences = []
    for i in range(count):
        order = nodes[:]
        rng.shuffle(order)
        placed: set[NodeId] = set()
        seq: list[TopologyChange] = []
        pending = set(map(tuple, edges))
        for v in order:
            attach = [u for u in target.adjacency[v] if u in placed and rng.random() < 0.5]
            seq.append(node_insert(v, attach))
            placed.add(v)
            for u in attach:
                pending.discard((min(u, v), max(u, v)))
        rest = sorted(pending)
        rng.shuffle(rest)
        seq += [edge_insert(u, v) for u, v in rest]
        if rng.random() < transient_fraction and placed:
            # splice in a transient node after all real nodes exist,
            # removed again before the end
            u = rng.choice(sorted(placed))
            extra_id = fresh + i
            pos = rng.randrange(len(order), len(seq) + 1)
            seq.insert(pos, node_insert(extra_id, [u]))
            remover = node_delete_abrupt if rng.random() < 0.5 else node_delete_graceful
            seq.append(remover(extra_id))
        sequences.append(seq)
    return sequences


def history_independence_demo(
    target: Graph,
    sequences: Iterable[list[TopologyChange]],
    seeds: Iterable[int],
    kind: ProtocolKind = ProtocolKind.TEMPLATE,
) -> dict:
    """Per-priority-seed exact check: every construction sequence of the
    target graph must end in the identical configuration, which must equal
    the sequential greedy output on the target."""
    sequences = list(sequences)
    checks = 0
    mismatches = 0
    for seed in seeds:
        p = PriorityMap(seed)
        want = greedy_mis(target, p)
        for seq in sequences:
            g = Graph()
            state: MisAssignment = {}
            for c in seq:
                rr = run_sync(g, p, c, kind, start=state, validate=False)
                g, state = rr.graph, rr.assignment
            checks += 1
            if not g.same_topology(target):
                raise ScenarioError("construction sequence does not produce the target")
            if state != want:
                mismatches += 1
    return {"checks": checks, "mismatches": mismatches, "sequences": len(sequences)}
