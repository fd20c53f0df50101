"""Command line front end.

Three subcommands:

  simulate          one strategy, one seed, full per-query emission
  compare           paired multi-seed comparison across strategies
  replay-histogram  before/after latency histogram with a replayed tail

Outputs land in --out (created if missing). All runs are deterministic
in the config seed.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .errors import ConfigError
from .harness import (
    before_after_histogram,
    build_shared,
    compare,
    emit_compare,
    emit_run,
    load_config,
    plot_before_after,
    plot_epoch_curves,
    run_scenario,
    write_json,
)
from .scenarios import CATALOG, scenario


def _add_simulate(sub) -> None:
    p = sub.add_parser("simulate", help="run one strategy and emit per-query records")
    p.add_argument("--config", required=True, help="scenario TOML file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_simulate)


def _add_compare(sub) -> None:
    p = sub.add_parser("compare", help="paired multi-seed strategy comparison")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--scenario", choices=sorted(CATALOG), help="catalog preset")
    g.add_argument("--config", help="scenario TOML file")
    p.add_argument("--seeds", type=int, default=5, help="number of master seeds")
    p.add_argument("--out", default=None, help="output directory (default runs/<name>)")
    p.add_argument(
        "--panel-nodes", default=None,
        help="comma-separated node indices for a multi-node epoch panel",
    )
    p.set_defaults(func=cmd_compare)


def _add_replay(sub) -> None:
    p = sub.add_parser(
        "replay-histogram",
        help="replay the first query window at the end and compare latency histograms",
    )
    p.add_argument("--config", required=True, help="scenario TOML file (explicit rounds)")
    p.add_argument("--window", type=int, required=True, help="window length in rounds")
    p.add_argument("--out", default=None, help="output directory (default runs/<name>)")
    p.set_defaults(func=cmd_replay)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kadsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_simulate(sub)
    _add_compare(sub)
    _add_replay(sub)
    return parser


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=int(args.seed)).validate()
    run = run_scenario(cfg, collect_queries=True)
    files = emit_run(run, args.out)
    print(f"{cfg.name}: strategy={run.strategy} seed={cfg.seed} rounds={run.rounds_run}")
    for path in files:
        print(f"  wrote {path}")
    return 0


def cmd_compare(args) -> int:
    cfg = scenario(args.scenario) if args.scenario else load_config(args.config)
    out_dir = args.out or os.path.join("runs", cfg.name)
    result = compare(cfg, seeds=args.seeds)
    files = emit_compare(result, out_dir)
    if args.panel_nodes:
        nodes = [int(tok) for tok in args.panel_nodes.split(",") if tok]
        files.append(_emit_panel(result, nodes, out_dir))
    print(f"{cfg.name}: strategies={','.join(result.strategies)} seeds={len(result.seeds)}")
    for strategy in result.strategies:
        stats = result.medians[strategy]
        line = f"  {strategy}: mean={stats['mean']:.1f} p90={stats['p90']:.1f}"
        if "converged" in stats:
            line += f" converged={stats['converged']:.1f}"
        ratio = result.ratios.get(strategy, {})
        for key in ("vs_vanilla", "vs_pns"):
            if key in ratio:
                line += f" {key}={ratio[key]:.3f}"
        print(line)
    for path in files:
        print(f"  wrote {path}")
    return 0


def _emit_panel(result, nodes: list, out_dir: str) -> str:
    """Per-node epoch curves for the learning strategy (first seed)."""
    run = result.first_seed_runs.get("kadabra")
    if run is None:
        raise ConfigError("a node panel needs 'kadabra' among the strategies")
    curves = {}
    for node in nodes:
        if not 0 <= node < len(run.node_ids):
            raise ConfigError(f"panel node {node} out of range")
        curves[f"node {run.node_ids[node]}"] = run.store.epoch_means(node, 1)
    path = os.path.join(out_dir, "panel.svg")
    plot_epoch_curves(curves, path, f"{result.config.name}: bucket 1 by node")
    return path


def cmd_replay(args) -> int:
    cfg = load_config(args.config)
    out_dir = args.out or os.path.join("runs", cfg.name)
    os.makedirs(out_dir, exist_ok=True)
    shared = build_shared(cfg, cfg.seed)
    report = {"window": args.window, "rounds": cfg.rounds, "p90": {}}
    files = []
    for strategy in cfg.strategies:
        first, last, ratio, _run = before_after_histogram(
            cfg, args.window, strategy=strategy, shared=shared,
        )
        report["p90"][strategy] = {
            "first": float(np.percentile(first, 90)),
            "last": float(np.percentile(last, 90)),
            "ratio": ratio,
        }
        svg = os.path.join(out_dir, f"before_after_{strategy}.svg")
        plot_before_after(first, last, svg, f"{cfg.name}: {strategy}")
        files.append(svg)
        print(f"  {strategy}: p90 ratio last/first = {ratio:.4f}")
    rj = os.path.join(out_dir, "replay.json")
    write_json(report, rj)
    files.append(rj)
    for path in files:
        print(f"  wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
