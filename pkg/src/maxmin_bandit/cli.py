"""Command-line interface: oracle queries, runs, batches, and matching
dynamics analysis.

Value precedence everywhere: explicit flags beat config-file entries, which
beat built-in defaults. Exit status is 0 only when every requested artifact
was completely written.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import statistics
import sys
from pathlib import Path

from .env import load_matrix
from .harness import (
    ExperimentConfig,
    convergence_epoch,
    run_batch,
    run_single,
    write_manifest,
    write_trace_csv,
)
from .oracle import (
    BipartiteGraph,
    enumeration_size,
    ENUMERATION_LIMIT,
    estimate_absorption_time,
    gamma_star,
    matching_histogram,
    max_sum_matching,
    minimal_gap,
)
from .plotting import emit_plot_svg

# (flag destination, config key) pairs forwarded verbatim when present.
_OVERRIDES = [
    ("horizon", "horizon"),
    ("runs", "runs"),
    ("seed", "seed"),
    ("noise", "noise"),
    ("c1", "c1"),
    ("c2", "c2"),
    ("c3", "c3"),
    ("ci_scale", "ci_scale"),
    ("epsilon_scale", "epsilon_scale"),
    ("stride", "stride"),
]


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("matrix", nargs="?", help="built-in name (u1, u2) or matrix file")
    parser.add_argument("--matrix", dest="matrix_flag", help="matrix selector (alternative to the positional)")
    parser.add_argument("--config", help="JSON file of experiment keys")
    parser.add_argument("--horizon", type=int)
    parser.add_argument("--runs", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--noise", type=float, help="uniform noise half-width")
    parser.add_argument("--c1", type=float)
    parser.add_argument("--c2", type=float)
    parser.add_argument("--c3", type=float)
    parser.add_argument("--ci-scale", dest="ci_scale", type=float)
    parser.add_argument("--epsilon-scale", dest="epsilon_scale", type=float)
    parser.add_argument("--no-warm-start", action="store_true")
    parser.add_argument("--stride", type=int)
    parser.add_argument("--out", default=".", help="output directory")


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    base = (
        ExperimentConfig.from_file(args.config)
        if args.config
        else ExperimentConfig()
    )
    overrides: dict[str, object] = {}
    if args.matrix and args.matrix_flag:
        raise ValueError("give the matrix either positionally or via --matrix, not both")
    matrix = args.matrix or args.matrix_flag
    if matrix:
        overrides["matrix"] = matrix
    for dest, key in _OVERRIDES:
        value = getattr(args, dest)
        if value is not None:
            overrides[key] = value
    if args.no_warm_start:
        overrides["warm_start"] = False
    return dataclasses.replace(base, **overrides)


def _fmt(value: object) -> str:
    """Format a value exactly as the JSON manifest serializes it."""
    return json.dumps(value)


def cmd_oracle(args: argparse.Namespace) -> int:
    matrix = load_matrix(args.matrix)
    print(f"matrix {matrix.name}: {matrix.n_players} players x {matrix.n_arms} arms")
    best = gamma_star(matrix)
    print(f"max-min value gamma* = {_fmt(best.bottleneck)}")
    print(f"max-min assignment: {list(best.assignment)}")
    if enumeration_size(matrix) <= ENUMERATION_LIMIT:
        hist = matching_histogram(matrix)
        print(f"bottleneck histogram over {hist.total} assignments:")
        for value in sorted(hist.counts):
            print(f"  {_fmt(value)}: {hist.counts[value]}")
    else:
        print(
            "bottleneck histogram skipped: "
            f"{enumeration_size(matrix)} assignments exceed the enumeration guard"
        )
    ms = max_sum_matching(matrix)
    print(
        f"max-sum = {_fmt(ms.total)} with bottleneck {_fmt(ms.bottleneck)}, "
        f"assignment {list(ms.assignment)}"
    )
    gap = minimal_gap(matrix)
    print(
        f"minimal within-row gap = {_fmt(gap.gap)} "
        f"(player {gap.player}, arms {gap.arms[0]} and {gap.arms[1]})"
    )
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace = run_single(config, run_index=0)
    conv = convergence_epoch(trace)
    write_trace_csv(trace, out / "trace.csv")
    emit_plot_svg(trace, out / "regret.svg", title=f"Cumulative max-min regret ({config.matrix})")
    write_manifest(
        out / "manifest.json",
        config,
        {
            "final_regret": trace.final_regret,
            "n_turns": trace.n_turns,
            "completed_epochs": len(trace.epochs),
            "convergence_epoch": conv,
        },
    )
    print(f"wrote trace.csv, regret.svg, manifest.json to {out}")
    print(f"final regret: {_fmt(trace.final_regret)}")
    print(f"completed epochs: {_fmt(len(trace.epochs))}")
    print(f"convergence epoch: {_fmt(conv)}")
    return 0


def cmd_batch(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary, _ = run_batch(config)
    converged = [e for e in summary.convergence_epochs if e is not None]
    stats: dict[str, object] = {
        "final_mean_regret": summary.final_mean_regret,
        "final_std_regret": summary.std_regret[-1],
        "converged_runs": len(converged),
        "convergence_epochs": summary.convergence_epochs,
    }
    if converged:
        stats["convergence_min"] = min(converged)
        stats["convergence_median"] = statistics.median(converged)
        stats["convergence_max"] = max(converged)
    write_trace_csv(summary, out / "summary.csv")
    emit_plot_svg(
        summary,
        out / "regret.svg",
        title=f"Cumulative max-min regret ({config.matrix}, {config.runs} runs)",
    )
    write_manifest(out / "manifest.json", config, stats)
    print(f"wrote summary.csv, regret.svg, manifest.json to {out}")
    print(f"final mean regret: {_fmt(summary.final_mean_regret)}")
    print(f"final std regret: {_fmt(summary.std_regret[-1])}")
    print(f"converged runs: {len(converged)}/{summary.n_runs}")
    if converged:
        print(
            f"convergence epochs: min {_fmt(stats['convergence_min'])} / "
            f"median {_fmt(stats['convergence_median'])} / "
            f"max {_fmt(stats['convergence_max'])}"
        )
    return 0


def cmd_dynamics(args: argparse.Namespace) -> int:
    matrix = load_matrix(args.matrix)
    graph = BipartiteGraph.from_threshold(matrix, args.gamma)
    est = estimate_absorption_time(
        graph, n_trials=args.trials, cap=args.cap, seed=args.seed
    )
    print(
        f"hold-or-resample dynamics on the level-{_fmt(args.gamma)} graph "
        f"of {matrix.name}:"
    )
    print(f"trials: {est.n_trials} (cap {args.cap} steps)")
    print(f"absorbed fraction: {_fmt(est.absorbed_fraction)}")
    print(f"mean absorption steps: {_fmt(est.mean_steps)}")
    print(f"max absorption steps: {_fmt(est.max_steps)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maxmin-bandit",
        description="Simulator and analysis toolkit for decentralized max-min fair matching on collision channels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_oracle = sub.add_parser("oracle", help="ground-truth statistics of a reward matrix")
    p_oracle.add_argument("matrix", help="built-in name (u1, u2) or matrix file")
    p_oracle.set_defaults(func=cmd_oracle)

    p_run = sub.add_parser("run", help="simulate one seeded game")
    _add_experiment_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_batch = sub.add_parser("batch", help="simulate a batch of games and aggregate")
    _add_experiment_flags(p_batch)
    p_batch.set_defaults(func=cmd_batch)

    p_dyn = sub.add_parser("dynamics", help="absorption statistics of the matching dynamics")
    p_dyn.add_argument("matrix", help="built-in name (u1, u2) or matrix file")
    p_dyn.add_argument("--gamma", type=float, required=True, help="threshold level")
    p_dyn.add_argument("--trials", type=int, default=10_000)
    p_dyn.add_argument("--cap", type=int, default=10_000)
    p_dyn.add_argument("--seed", type=int, default=0)
    p_dyn.set_defaults(func=cmd_dynamics)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, AssertionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
