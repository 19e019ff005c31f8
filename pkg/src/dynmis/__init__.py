"""Self-adjusting maximal independent sets in dynamic broadcast networks:
sequential reference algorithms, two distributed protocols, round/event
schedulers, derived clustering and matching, and an experiment harness."""

from .graph import (
    ChangeKind,
    Graph,
    InvalidChange,
    MalformedChange,
    NodeId,
    Priority,
    PriorityMap,
    TopologyChange,
    apply_change,
    edge_delete_abrupt,
    edge_delete_graceful,
    edge_insert,
    locus,
    lower_neighbors,
    node_delete_abrupt,
    node_delete_graceful,
    node_insert,
    node_unmute,
)
from .oracle import (
    InfluencedSet,
    MisAssignment,
    brute_force_cc_opt,
    check_invariant,
    greedy_mis,
    influence_if_first,
    influenced_set,
    mean_influence_estimate,
)
from .protocol import BroadcastMsg, NodeState, ProtocolKind, ProtocolNode
from .engine import ChangeMetrics, ProtocolError, RoundLog, RunResult, run_async, run_sync, stability_check
from .clustering import (
    Clustering,
    LineGraphMirror,
    cc_cost,
    cluster_from_mis,
    is_maximal_matching,
    line_graph,
    matching_via_line_graph,
)
from .harness import (
    Scenario,
    ScenarioError,
    TrialStats,
    deterministic_baseline,
    generate_scenario,
    history_independence_demo,
    load_scenario,
    run_scenario,
    save_scenario,
)

__version__ = "0.1.0"
