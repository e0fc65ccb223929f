"""Command-line entry point: ``taco <subcommand> [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import __version__, gnn
from .coarsen import IMPORTANCE_MEASURES, generate_reduced, normalize_partition, repro_coarsen
from .config import read_config, write_config
from .fidelity import STRATEGIES
from .framework import MODES, StreamConfig, run_stream
from .graph import SparseGraph
from .seeding import derive_seed
from .stream import TimestampedGraph, load_dataset, split_tasks
from .synthetic import EDGE_FILE, NODE_FILE, SyntheticStreamSpec, generate_synthetic, write_dataset
from .theory import (
    VoteSimConfig,
    check_laplacian_equivalence,
    random_nontwin_pair,
    random_twin_graph,
    simulate_partition_vote,
)

log = logging.getLogger("taco")


def _floats(text: str) -> list[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


def _dataset_paths(args) -> tuple[Path, Path]:
    if args.tasks:
        base = Path(args.tasks)
        return base / NODE_FILE, base / EDGE_FILE
    if args.nodes and args.edges:
        return Path(args.nodes), Path(args.edges)
    raise ValueError("give --tasks DIR or both --nodes and --edges")


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tasks", help=f"directory holding {NODE_FILE} and {EDGE_FILE}")
    p.add_argument("--nodes", help="node file (alternative to --tasks)")
    p.add_argument("--edges", help="edge file (alternative to --tasks)")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="taco", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    subs: dict[str, argparse.ArgumentParser] = {}

    p = sub.add_parser("run", help="run a training regime over a task stream")
    _add_dataset_args(p)
    p.add_argument("--config", help="key=value config file; command-line flags win")
    p.add_argument("--mode", choices=MODES, default="taco")
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--epsilon", type=float, default=2.0)
    p.add_argument("--importance", choices=IMPORTANCE_MEASURES, default="degree")
    p.add_argument("--buffer-capacity", type=int, default=200)
    p.add_argument("--buffer-strategy", choices=STRATEGIES, default="reservoir")
    p.add_argument("--hidden", type=int, default=48)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--weight-decay", type=float, default=5e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--out", required=False, help="result JSON path (a .manifest file is written next to it)")
    subs["run"] = p

    p = sub.add_parser("coarsen", help="coarsen a whole dataset once and write the reduced graph")
    _add_dataset_args(p)
    p.add_argument("--config")
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--importance", choices=IMPORTANCE_MEASURES, default="degree")
    p.add_argument("--epsilon", type=float, default=2.0)
    p.add_argument("--embedding", choices=("gcn", "features"), default="gcn",
                   help="node representation used for scoring edges")
    p.add_argument("--hidden", type=int, default=48)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    subs["coarsen"] = p

    p = sub.add_parser("simulate-vote", help="Monte Carlo class shares after random clustering + majority vote")
    p.add_argument("--config")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--c", type=int, default=2)
    p.add_argument("--p", default=None, help="comma-separated class distribution (default uniform)")
    p.add_argument("--gamma", default="0.5", help="one value or a comma-separated list")
    p.add_argument("--b", default="0", help="protected singletons; 'auto' means floor(n'/5)")
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path (default stdout)")
    subs["simulate-vote"] = p

    p = sub.add_parser("check-spectral", help="quadratic-form deviation after merging twin nodes")
    p.add_argument("--config")
    _add_dataset_args(p)
    p.add_argument("--i", type=int, help="first node index (file mode)")
    p.add_argument("--j", type=int, help="second node index (file mode)")
    p.add_argument("--graphs", type=int, default=20, help="random graphs when no dataset is given")
    p.add_argument("--max-n", type=int, default=30)
    p.add_argument("--vectors", type=int, default=100)
    p.add_argument("--operator", choices=("laplacian", "augmented", "normalized"), default="laplacian")
    p.add_argument("--seed", type=int, default=0)
    subs["check-spectral"] = p

    p = sub.add_parser("gen-synthetic", help="write a synthetic drifting stream")
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--num-tasks", type=int, default=5)
    p.add_argument("--nodes-per-task", type=int, default=500)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--start-mixture", default=None)
    p.add_argument("--end-mixture", default=None)
    p.add_argument("--p-in", type=float, default=0.02)
    p.add_argument("--p-out", type=float, default=0.002)
    p.add_argument("--p-cross", type=float, default=0.002)
    p.add_argument("--feature-dim", type=int, default=16)
    p.add_argument("--feature-noise", type=float, default=1.0)
    p.add_argument("--feature-drift", type=float, default=0.0)
    p.add_argument("--masked-classes", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    subs["gen-synthetic"] = p
    return parser, subs


def _apply_config(sub: argparse.ArgumentParser, path) -> None:
    values = read_config(path)
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        if key not in actions or key == "config":
            raise ValueError(f"{path}: unknown config key {key!r}")
        action = actions[key]
        defaults[key] = action.type(raw) if action.type else raw
    sub.set_defaults(**defaults)


def _stream_config(args) -> StreamConfig:
    return StreamConfig(
        gamma=args.gamma,
        epsilon=args.epsilon,
        importance=args.importance,
        buffer_capacity=args.buffer_capacity,
        buffer_strategy=args.buffer_strategy,
        hidden=args.hidden,
        epochs=args.epochs,
        lr=args.lr,
        weight_decay=args.weight_decay,
        seed=args.seed,
    )


def cmd_run(args) -> int:
    node_path, edge_path = _dataset_paths(args)
    g = load_dataset(node_path, edge_path)
    tasks = split_tasks(g)
    base = _stream_config(args)
    results = []
    for k in range(args.trials):
        seed = args.seed if args.trials == 1 else derive_seed(args.seed, f"trial:{k}")
        cfg = StreamConfig(**{**asdict(base), "seed": seed})
        results.append(run_stream(tasks, cfg, args.mode, num_classes=g.num_classes).to_json())
    payload = results[0] if args.trials == 1 else {
        "trials": results,
        "mean": {key: float(np.mean([r[key] for r in results]))
                 for key in ("f1_ap", "f1_af", "bacc_ap", "bacc_af", "f1_af_st") if results[0][key] is not None},
    }
    text = json.dumps(payload, indent=2)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n", encoding="utf-8")
        manifest = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose", "out")}
        manifest["nodes"], manifest["edges"], manifest["tasks"] = str(node_path), str(edge_path), None
        write_config(
            out.with_name(out.name + ".manifest"),
            manifest,
            header=[f"taco {__version__}", f"python {platform.python_version()}, numpy {np.__version__}",
                    f"rerun: taco run --config {out.name}.manifest --out <path>"],
        )
    else:
        print(text)
    return 0


def cmd_coarsen(args) -> int:
    node_path, edge_path = _dataset_paths(args)
    ts = load_dataset(node_path, edge_path)
    pos = ts.index_of()
    pairs = [(pos[s], pos[o]) for s, o in ts.edges.tolist()]
    g = SparseGraph.from_edges(ts.n, pairs, ts.features, ts.labels)
    labeled = np.flatnonzero(g.labels >= 0)
    if args.embedding == "gcn" and ts.num_classes >= 2 and len(labeled):
        model = gnn.GcnModel.init(ts.num_features, ts.num_classes, args.hidden, derive_seed(args.seed, "model"))
        gnn.train(model, g, labeled, gnn.TrainConfig(args.epochs, args.lr, 5e-4, args.seed))
        h, _ = gnn.forward(model, g)
    else:
        h = g.features
    part = repro_coarsen(g, h, (), args.gamma, args.epsilon, args.importance)
    reduced = generate_reduced(g, part, normalize_partition(part))

    tau = np.zeros(part.n_clusters, dtype=np.int64)
    np.maximum.at(tau, part.cluster_id, ts.tau)
    coo = sp.triu(reduced.adjacency, format="coo")
    rows, cols, weights = coo.row, coo.col, coo.data
    # newer endpoint first, matching the source/target convention
    newer = tau[rows] >= tau[cols]
    src = np.where(newer, rows, cols)
    dst = np.where(newer, cols, rows)
    out_graph = TimestampedGraph(
        node_ids=np.arange(part.n_clusters, dtype=np.int64),
        tau=tau,
        labels=reduced.labels,
        features=reduced.features,
        edges=np.stack([src, dst], axis=1).astype(np.int64).reshape(-1, 2),
    )
    out = Path(args.out)
    write_dataset(out_graph, out, edge_weights=weights)
    mapping = ["original_node_id\tcluster_id"] + [
        f"{v}\t{c}" for v, c in zip(ts.node_ids.tolist(), part.cluster_id.tolist())
    ]
    (out / "mapping.tsv").write_text("\n".join(mapping) + "\n", encoding="utf-8")
    summary = {
        "nodes": ts.n,
        "clusters": part.n_clusters,
        "target": part.target,
        "reached_target": part.reached,
        "edge_weight_total": float(reduced.adjacency.sum()),
    }
    print(json.dumps(summary))
    return 0


def cmd_simulate_vote(args) -> int:
    p = _floats(args.p) if args.p else [1.0 / args.c] * args.c
    rows = []
    for gamma in _floats(args.gamma):
        n_clusters = int(np.floor(gamma * args.n))
        b = n_clusters // 5 if str(args.b) == "auto" else int(args.b)
        cfg = VoteSimConfig(args.n, args.c, np.asarray(p), gamma, b, args.trials, args.seed)
        est = simulate_partition_vote(cfg)
        for k in range(args.c):
            rows.append([k, p[k], gamma, b, float(est.mean[k]), float(est.stderr[k])])
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        writer = csv.writer(fh)
        writer.writerow(["class", "p_k", "gamma", "b", "estimate", "stderr"])
        writer.writerows(rows)
    finally:
        if args.out:
            fh.close()
    return 0


def cmd_check_spectral(args) -> int:
    if args.tasks or args.nodes:
        node_path, edge_path = _dataset_paths(args)
        ts = load_dataset(node_path, edge_path)
        pos = ts.index_of()
        g = SparseGraph.from_edges(ts.n, [(pos[s], pos[o]) for s, o in ts.edges.tolist()], ts.features)
        if args.i is None or args.j is None:
            raise ValueError("file mode needs --i and --j")
        dev = check_laplacian_equivalence(g, args.i, args.j, args.vectors, args.seed, args.operator)
        print(json.dumps({"max_deviation": dev}))
        return 0
    rng = np.random.default_rng(args.seed)
    twin, other = [], []
    for _ in range(args.graphs):
        n = int(rng.integers(3, args.max_n + 1))
        g, i, j = random_twin_graph(n, float(rng.uniform(0.1, 0.6)), rng)
        twin.append(check_laplacian_equivalence(g, i, j, args.vectors, int(rng.integers(2**31)), args.operator))
        g, i, j = random_nontwin_pair(n, float(rng.uniform(0.1, 0.6)), rng)
        other.append(check_laplacian_equivalence(g, i, j, args.vectors, int(rng.integers(2**31)), args.operator,
                                                 require_twins=False))
    print(json.dumps({"operator": args.operator, "max_deviation": max(twin),
                      "min_deviation_non_twin": min(other), "graphs": args.graphs}))
    return 0


def cmd_gen_synthetic(args) -> int:
    spec = SyntheticStreamSpec(
        tasks=args.num_tasks,
        nodes_per_task=args.nodes_per_task,
        classes=args.classes,
        start_mixture=tuple(_floats(args.start_mixture)) if args.start_mixture else None,
        end_mixture=tuple(_floats(args.end_mixture)) if args.end_mixture else None,
        p_in=args.p_in,
        p_out=args.p_out,
        p_cross=args.p_cross,
        feature_dim=args.feature_dim,
        feature_noise=args.feature_noise,
        feature_drift=args.feature_drift,
        masked_classes=args.masked_classes,
        seed=args.seed,
    )
    node_path, edge_path = write_dataset(generate_synthetic(spec), args.out)
    print(json.dumps({"nodes": str(node_path), "edges": str(edge_path)}))
    return 0


COMMANDS = {
    "run": cmd_run,
    "coarsen": cmd_coarsen,
    "simulate-vote": cmd_simulate_vote,
    "check-spectral": cmd_check_spectral,
    "gen-synthetic": cmd_gen_synthetic,
}


def main(argv: list[str] | None = None) -> int:
    parser, subs = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if getattr(args, "config", None):
            _apply_config(subs[args.command], args.config)
            args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"taco {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
