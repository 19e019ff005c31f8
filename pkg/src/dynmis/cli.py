"""Command line interface.

    dynmis run SCENARIO.jsonl [--protocol template|four-state] [--mode sync|async]
               [--trials N] [--seed S] [--out metrics.csv] [--debug-rounds rounds.jsonl]
    dynmis sweep --kind KIND [--set k=v ...] [--grid PARAM=v1,v2,...]
               [--protocol ...] [--trials N] [--seed S] [--out sweep.csv]
    dynmis demo NAME [--trials N] [--seed S] [--out-dir DIR]

Exit codes: 0 success, 1 membership-rule violation or protocol failure,
2 malformed input.

Asynchronous runs report the longest causal chain in the rounds column,
counting the triggering change as depth 0.
"""

from __future__ import annotations

import argparse
import statistics
import sys
from pathlib import Path

from .clustering import cc_cost, cluster_from_mis, matching_via_line_graph
from .engine import ProtocolError
from .graph import Graph, MalformedChange, PriorityMap, apply_change, mix64
from .harness import (
    ScenarioError,
    TrialStats,
    generate_scenario,
    gnp_graph,
    history_independence_demo,
    load_scenario,
    random_constructions,
    run_deterministic_sequence,
    run_scenario,
    trial_seed,
)
from .oracle import brute_force_cc_opt, greedy_mis
from .protocol import ProtocolKind

DEMOS = (
    "star",
    "three-paths",
    "bipartite-separation",
    "history-independence",
    "clustering-approx",
)


def _protocol(name: str) -> ProtocolKind:
    return ProtocolKind.TEMPLATE if name == "template" else ProtocolKind.FOUR_STATE


def _print_aggregates(stats: TrialStats) -> None:
    agg = stats.aggregates()
    print(f"changes executed: {len(stats.records)}")
    for metric, (mean, se, mx) in agg.items():
        print(f"  {metric:12s} mean={mean:.4f} std_err={se:.4f} max={mx:.0f}")
    if stats.final_mis_sizes:
        m = statistics.fmean(stats.final_mis_sizes)
        print(f"  final set size mean={m:.3f} over {len(stats.final_mis_sizes)} trials")


def cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    stats = run_scenario(
        scenario,
        kind=_protocol(args.protocol),
        mode=args.mode,
        trials=args.trials,
        seed=args.seed,
        out_csv=args.out,
        debug_rounds=args.debug_rounds,
    )
    _print_aggregates(stats)
    if args.out:
        print(f"wrote {args.out}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    fixed = {}
    for item in args.set or ():
        k, _, v = item.partition("=")
        fixed[k] = v
    grid_param, grid_values = None, [None]
    if args.grid:
        grid_param, _, raw = args.grid.partition("=")
        grid_values = raw.split(",")
    all_stats = TrialStats()
    for value in grid_values:
        params = dict(fixed)
        if grid_param:
            params[grid_param] = value
        scenario = generate_scenario(args.kind, params, seed=args.seed)
        if grid_param:
            scenario.name = f"{scenario.name}_{grid_param}{value}"
        stats = run_scenario(
            scenario,
            kind=_protocol(args.protocol),
            mode=args.mode,
            trials=args.trials,
            seed=args.seed,
        )
        print(f"--- {scenario.name}")
        _print_aggregates(stats)
        all_stats.records.extend(stats.records)
    if args.out:
        all_stats.write_csv(args.out)
        print(f"wrote {args.out}")
    return 0


def _demo_star(trials: int, seed: int, out_dir: Path) -> None:
    n = 100
    scenario = generate_scenario("star", {"n": n}, seed)
    stats = run_scenario(
        scenario, trials=trials, seed=seed, out_csv=out_dir / "star.csv"
    )
    mean = statistics.fmean(stats.final_mis_sizes)
    analytic = (n - 1) * (1 - 1 / n) + 1 / n
    print(f"star(n={n}): mean final set size {mean:.3f}, analytic {analytic:.3f}")
    _print_aggregates(stats)


def _demo_three_paths(trials: int, seed: int, out_dir: Path) -> None:
    paths = 500
    scenario = generate_scenario("three_paths", {"paths": paths}, seed)
    g = Graph()
    for c in scenario.changes:
        g = apply_change(g, c)
    sizes = []
    for t in range(trials):
        p_edges = PriorityMap(trial_seed(seed, t))
        sizes.append(len(matching_via_line_graph(g, p_edges)))
    mean = statistics.fmean(sizes)
    print(
        f"three_paths(paths={paths}, n={4 * paths}): mean matching size "
        f"{mean:.2f}, prediction {5 * 4 * paths / 12:.2f}"
    )


def _demo_bipartite(trials: int, seed: int, out_dir: Path) -> None:
    k = 20
    scenario = generate_scenario("bipartite_kk", {"k": k}, seed)
    det = run_deterministic_sequence(scenario)
    print(f"deterministic baseline: per-change adjustments {det}")
    print(f"  worst single change: {max(det)} (lower side size {k})")
    stats = run_scenario(
        scenario, trials=trials, seed=seed, out_csv=out_dir / "bipartite.csv"
    )
    deletions = [r for r in stats.records if r.change_type.startswith("node_delete")]
    mean = statistics.fmean(r.adjustments for r in deletions)
    print(f"randomized protocol: mean adjustments per deletion {mean:.4f}")


def _demo_history(trials: int, seed: int, out_dir: Path) -> None:
    rng_seed = mix64(seed + 17)
    import random

    target = gnp_graph(8, 0.3, random.Random(rng_seed))
    sequences = random_constructions(target, 20, seed)
    seeds = [trial_seed(seed, t) for t in range(max(trials, 10))]
    report = history_independence_demo(target, sequences, seeds)
    print(
        f"history independence: {report['checks']} sequence runs, "
        f"{report['mismatches']} mismatches"
    )


def _demo_clustering(trials: int, seed: int, out_dir: Path) -> None:
    import random

    rng = random.Random(seed)
    rows = []
    for i in range(8):
        g = gnp_graph(rng.randrange(4, 9), rng.uniform(0.25, 0.7), rng)
        opt = brute_force_cc_opt(g)
        costs = []
        for t in range(trials):
            p = PriorityMap(trial_seed(seed + i, t))
            a = greedy_mis(g, p)
            costs.append(cc_cost(g, cluster_from_mis(g, p, a)))
        mean = statistics.fmean(costs)
        rows.append((len(g), opt, mean))
        print(f"graph {i}: n={len(g)} opt={opt} mean cost={mean:.3f} (3*opt={3 * opt})")
    ok = all(mean <= 3 * opt + 0.25 for _, opt, mean in rows)
    print(f"three-approximation holds on all sampled graphs: {ok}")


def cmd_demo(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trials = args.trials
    if args.name == "star":
        _demo_star(trials or 2000, args.seed, out_dir)
    elif args.name == "three-paths":
        _demo_three_paths(trials or 200, args.seed, out_dir)
    elif args.name == "bipartite-separation":
        _demo_bipartite(trials or 500, args.seed, out_dir)
    elif args.name == "history-independence":
        _demo_history(trials or 20, args.seed, out_dir)
    elif args.name == "clustering-approx":
        _demo_clustering(trials or 2000, args.seed, out_dir)
    else:
        raise ScenarioError(f"unknown demo {args.name!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="dynmis",
        description="Dynamic independent-set maintenance simulator",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--protocol", choices=("template", "four-state"), default="four-state")
        p.add_argument("--mode", choices=("sync", "async"), default="sync")
        p.add_argument("--trials", type=int, default=1)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="CSV output path")

    p_run = sub.add_parser("run", help="execute a scenario file")
    p_run.add_argument("scenario", help="JSONL scenario file")
    common(p_run)
    p_run.add_argument("--debug-rounds", help="JSONL per-round log output")
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a generated scenario over a parameter grid")
    p_sweep.add_argument("--kind", required=True,
                         choices=("star", "three_paths", "bipartite_kk", "gnp_churn"))
    p_sweep.add_argument("--set", action="append", metavar="K=V",
                         help="fixed generator parameter")
    p_sweep.add_argument("--grid", metavar="K=V1,V2,...",
                         help="parameter swept across values")
    common(p_sweep)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_demo = sub.add_parser("demo", help="named demonstration experiments")
    p_demo.add_argument("name", choices=DEMOS)
    p_demo.add_argument("--trials", type=int, default=0, help="0 = demo default")
    p_demo.add_argument("--seed", type=int, default=0)
    p_demo.add_argument("--out-dir", default="out")
    p_demo.set_defaults(fn=cmd_demo)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ScenarioError, MalformedChange, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ProtocolError as exc:
        print(f"protocol failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
