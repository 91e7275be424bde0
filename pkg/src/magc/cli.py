"""Command-line front end: cluster, gen-sbm, eval and bench subcommands.

Every run emits a machine-readable JSON report (validated against the
schemas shipped with the package) alongside plain-text outputs, so an
experiment is reproducible from its own report: the echoed config plus seed
regenerate the labels exactly.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

import jsonschema

from . import dataio, metrics, sbm, solver
from .errors import MagcError, ZeroVolumeCluster
from .graph import AttributedGraph, build_derived

# Weight grid used by `cluster --grid` unless overridden in the config file
# (keys grid-alpha, grid-beta, grid-gamma, grid-lambda, comma-separated).
# Selection is label-free: highest modularity, ties broken by conductance.
DEFAULT_GRID = {
    "alpha": [1.0, 10.0],
    "beta": [0.5, 2.0],
    "gamma": [1.0],
    "lambda": [0.0],
}

_EXIT_OK = 0
_EXIT_ERROR = 1
_EXIT_MAX_ITERS = 2

# Owning module per error type, for module-qualified CLI messages.
_ERROR_OWNER = {
    "ParseError": "io",
    "SelfLoop": "io",
    "NegativeWeight": "io",
    "DimensionMismatch": "graph",
    "AsymmetricAdjacency": "graph",
    "EmptyGraph": "graph",
    "SingularCoarseLaplacian": "solver",
    "SingularSystem": "solver",
    "NonFinite": "solver",
    "MissingFeatures": "solver",
    "InvalidConfig": "config",
    "InvalidDegrees": "sbm",
    "GroupMismatch": "sbm",
    "LengthMismatch": "metrics",
    "ZeroVolumeCluster": "metrics",
}


def _schema(name: str) -> dict:
    with resources.files("magc.schema").joinpath(name).open("r") as fh:
        return json.load(fh)


def validate_report(report: dict, schema_name: str = "run_report.schema.json") -> None:
    jsonschema.validate(report, _schema(schema_name))


def _read_config_file(path: str) -> dict[str, str]:
    """Flat key-value file: one `key = value` per line, '#' comments."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).open("r", encoding="utf-8"), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise MagcError(f"{path}:{lineno}: expected 'key = value'")
        key, value = body.split("=", 1)
        out[key.strip().replace("_", "-")] = value.strip()
    return out


def _merge(args: argparse.Namespace, file_cfg: dict[str, str], key: str, cast, default):
    """Flag value if given, else config-file value, else default."""
    flag_val = getattr(args, key.replace("-", "_"), None)
    if flag_val is not None:
        return flag_val
    if key in file_cfg:
        raw = file_cfg[key]
        if cast is bool:
            return raw.lower() in ("1", "true", "yes", "on")
        return cast(raw)
    return default


def _parse_grid(file_cfg: dict[str, str]) -> dict[str, list[float]]:
    grid = {}
    for name in ("alpha", "beta", "gamma", "lambda"):
        key = f"grid-{name}"
        if key in file_cfg:
            grid[name] = [float(v) for v in file_cfg[key].replace(",", " ").split()]
        else:
            grid[name] = list(DEFAULT_GRID[name])
    return grid


def _solver_config(settings: dict) -> solver.SolverConfig:
    return solver.SolverConfig(
        k=settings["k"],
        alpha=settings["alpha"],
        beta=settings["beta"],
        gamma=settings["gamma"],
        lambda_=settings["lambda"],
        max_iters=settings["max-iters"],
        rel_tol=settings["rel-tol"],
        step_policy=settings["step-policy"],
        init=settings["init"],
        seed=settings["seed"],
    )


def _run_single(payload):
    """Solve one configuration; used directly and as a pool worker."""
    graph, X, cfg = payload
    derived = build_derived(graph)
    t0 = time.perf_counter()
    state, labels = solver.solve(graph, cfg, features=X, derived=derived)
    wall = time.perf_counter() - t0
    kkt = solver.kkt_residual(state, derived, X, cfg)
    q = metrics.modularity_score(graph, labels)
    try:
        cond = metrics.conductance(graph, labels)
    except ZeroVolumeCluster:
        cond = None
    return {
        "labels": labels,
        "trace": [rec.as_dict() for rec in state.loss_trace],
        "iterations": state.t,
        "converged": state.converged,
        "kkt_residual": kkt,
        "wall_time_sec": wall,
        "modularity": q,
        "conductance": cond,
        "weights": {
            "alpha": cfg.alpha,
            "beta": cfg.beta,
            "gamma": cfg.gamma,
            "lambda": cfg.lambda_,
        },
    }


def run_grid(graph, X, base: solver.SolverConfig, grid: dict[str, list[float]]):
    """Solve every weight combination; pick by modularity, then conductance.

    Selection never sees ground-truth labels.  Returns (results, chosen index).
    """
    combos = list(
        itertools.product(grid["alpha"], grid["beta"], grid["gamma"], grid["lambda"])
    )
    payloads = []
    for a, b, g, lam in combos:
        cfg = solver.SolverConfig(
            k=base.k,
            alpha=a,
            beta=b,
            gamma=g,
            lambda_=lam,
            max_iters=base.max_iters,
            rel_tol=base.rel_tol,
            step_policy=base.step_policy,
            init=base.init,
            seed=base.seed,
        )
        payloads.append((graph, X, cfg))

    workers = int(os.environ.get("MAGC_THREADS", "1") or "1")
    if workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_single, payloads))
    else:
        results = [_run_single(p) for p in payloads]

    def score(res):
        cond = res["conductance"]
        return (res["modularity"], -(cond if cond is not None else math.inf))

    best = max(range(len(results)), key=lambda i: (score(results[i]), -i))
    return results, best


def cmd_cluster(args: argparse.Namespace) -> int:
    file_cfg = _read_config_file(args.config) if args.config else {}
    settings = {
        "edges": _merge(args, file_cfg, "edges", str, None),
        "features": _merge(args, file_cfg, "features", str, None),
        "labels": _merge(args, file_cfg, "labels", str, None),
        "k": _merge(args, file_cfg, "k", int, None),
        "alpha": _merge(args, file_cfg, "alpha", float, 1.0),
        "beta": _merge(args, file_cfg, "beta", float, 1.0),
        "gamma": _merge(args, file_cfg, "gamma", float, 1.0),
        "lambda": _merge(args, file_cfg, "lambda", float, 0.0),
        "max-iters": _merge(args, file_cfg, "max-iters", int, 1000),
        "rel-tol": _merge(args, file_cfg, "rel-tol", float, 1e-7),
        "seed": _merge(args, file_cfg, "seed", int, 0),
        "step-policy": _merge(args, file_cfg, "step-policy", str, "backtracking"),
        "init": _merge(args, file_cfg, "init", str, "random-uniform"),
        "out-dir": _merge(args, file_cfg, "out-dir", str, "."),
        "grid": bool(args.grid)
        or file_cfg.get("grid", "").lower() in ("1", "true", "yes", "on"),
    }
    if settings["edges"] is None:
        raise MagcError("missing required --edges (or 'edges' in the config file)")
    if settings["k"] is None:
        raise MagcError("missing required --k (or 'k' in the config file)")

    bundle = dataio.load_bundle(
        settings["edges"], settings["features"], settings["labels"]
    )
    graph = bundle.graph
    X = graph.features if graph.features is not None else dataio.degree_onehot(graph)

    base = _solver_config(settings)
    grid_info = None
    if settings["grid"]:
        grid = _parse_grid(file_cfg)
        results, chosen = run_grid(graph, X, base, grid)
        result = results[chosen]
        grid_info = {
            "selected": chosen,
            "points": [
                {
                    "weights": r["weights"],
                    "modularity": r["modularity"],
                    "conductance": r["conductance"],
                    "converged": r["converged"],
                    "iterations": r["iterations"],
                }
                for r in results
            ],
        }
        settings.update({k: v for k, v in result["weights"].items()})
    else:
        result = _run_single((graph, X, base))

    labels_out = result["labels"]
    evaluation = None
    if graph.labels is not None:
        ev = metrics.evaluate(graph, graph.labels, labels_out)
        evaluation = ev.as_dict()

    out_dir = Path(settings["out-dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    dataio.save_labels(out_dir / "labels.txt", labels_out)
    if bundle.node_names is not None:
        dataio.save_node_names(out_dir / "node_map.txt", bundle.node_names)

    report = {
        "config": {k: settings[k] for k in sorted(settings)},
        "seed": settings["seed"],
        "iterations": result["iterations"],
        "converged": result["converged"],
        "final_loss": result["trace"][-1],
        "kkt_residual": result["kkt_residual"],
        "wall_time_sec": result["wall_time_sec"],
        "evaluation": evaluation,
        "loss_trace": result["trace"],
        "grid": grid_info,
    }
    validate_report(report)
    (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")

    print(
        f"cluster: {result['iterations']} iterations, "
        f"converged={result['converged']}, modularity={result['modularity']:.4f}"
    )
    return _EXIT_OK if result["converged"] else _EXIT_MAX_ITERS


def cmd_gen_sbm(args: argparse.Namespace) -> int:
    block_sizes = None
    if args.block_sizes:
        block_sizes = tuple(int(s) for s in args.block_sizes.replace(",", " ").split())
    cfg = sbm.SbmConfig(
        p=args.p,
        k=args.k,
        block_sizes=block_sizes,
        expected_degree=args.expected_degree,
        expected_sub_degree=args.expected_sub_degree,
        powerlaw_exponent=args.powerlaw_exponent,
        theta_min=args.theta_min,
        theta_max=args.theta_max,
        feature_dim=args.feature_dim,
        feature_groups=args.feature_groups,
        class_sep=args.class_sep,
        seed=args.seed,
    )
    graph = sbm.generate(cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataio.save_edge_list(out_dir / "edges.txt", graph.adjacency)
    dataio.save_features_csv(out_dir / "features.csv", graph.features)
    dataio.save_labels(out_dir / "labels.txt", graph.labels)

    realized = float(graph.adjacency.sum()) / cfg.p
    echo = [
        f"p = {cfg.p}",
        f"k = {cfg.k}",
        f"block-sizes = {','.join(str(s) for s in cfg.resolved_block_sizes())}",
        f"expected-degree = {cfg.expected_degree}",
        f"expected-sub-degree = {cfg.expected_sub_degree}",
        f"powerlaw-exponent = {cfg.powerlaw_exponent}",
        f"theta-min = {cfg.theta_min}",
        f"theta-max = {cfg.theta_max}",
        f"feature-dim = {cfg.feature_dim}",
        f"feature-groups = {cfg.feature_groups if cfg.feature_groups is not None else cfg.k}",
        f"class-sep = {cfg.class_sep}",
        f"seed = {cfg.seed}",
        f"# realized mean degree = {realized:.4f}",
    ]
    (out_dir / "gen_config.txt").write_text("\n".join(echo) + "\n")
    print(f"gen-sbm: wrote p={cfg.p} graph, realized mean degree {realized:.2f}")
    return _EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    adjacency, _ = dataio.load_edge_list(args.edges)
    y_true = dataio.load_labels(args.labels)
    y_pred = dataio.load_labels(args.pred)
    graph = AttributedGraph(adjacency=adjacency, labels=None)
    table = metrics.contingency_table(y_true, y_pred)
    try:
        cond = metrics.conductance(graph, y_pred)
    except ZeroVolumeCluster:
        cond = None
    report = {
        "inputs": {"edges": args.edges, "labels": args.labels, "pred": args.pred},
        "evaluation": {
            "nmi": metrics.nmi(y_true, y_pred),
            "ari": metrics.ari(y_true, y_pred),
            "acc": metrics.accuracy(y_true, y_pred),
            "modularity": metrics.modularity_score(graph, y_pred),
            "conductance": cond,
        },
        "contingency": table.tolist(),
    }
    validate_report(report, "eval_report.schema.json")
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return _EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    p_grid = [int(v) for v in args.p_grid.replace(",", " ").split()]
    rows = []
    for p in p_grid:
        cfg_gen = sbm.SbmConfig(
            p=p,
            k=args.k,
            expected_degree=20.0,
            expected_sub_degree=2.0,
            feature_dim=args.feature_dim,
            seed=args.seed,
        )
        graph = sbm.generate(cfg_gen)
        X = graph.features
        derived = build_derived(graph)
        cfg = solver.SolverConfig(k=args.k, alpha=1.0, beta=1.0, gamma=1.0, seed=args.seed)
        rng = np.random.default_rng(cfg.seed)
        C = solver.init_assignment(p, cfg, rng, graph.adjacency, derived.degree)
        X_C = solver.update_XC(C, derived, X, cfg)
        f_cur = solver.loss(C, X_C, derived, X, cfg).total
        # Warm-up sweep (fills spectral caches, stabilizes timings).
        C, _ = solver.update_C(C, X_C, derived, X, cfg, f_current=f_cur)
        X_C = solver.update_XC(C, derived, X, cfg)
        t0 = time.perf_counter()
        for _ in range(args.iters):
            f_cur = solver.loss(C, X_C, derived, X, cfg).total
            C, _ = solver.update_C(C, X_C, derived, X, cfg, f_current=f_cur)
            X_C = solver.update_XC(C, derived, X, cfg)
        per_iter = (time.perf_counter() - t0) / args.iters
        rows.append({"p": p, "seconds_per_iteration": per_iter})
        print(f"bench: p={p:6d}  {per_iter * 1e3:9.2f} ms/iteration")

    logs = np.log([r["p"] for r in rows])
    logt = np.log([r["seconds_per_iteration"] for r in rows])
    exponent = float(np.polyfit(logs, logt, 1)[0])
    print(f"bench: fitted growth exponent {exponent:.3f}")
    table = {"rows": rows, "exponent": exponent, "k": args.k, "feature_dim": args.feature_dim}
    if args.out:
        Path(args.out).write_text(json.dumps(table, indent=2) + "\n")
    return _EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magc",
        description="Attributed graph clustering via coarsening and modularity maximization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("cluster", help="cluster a graph and write labels + report")
    pc.add_argument("--edges", type=str, default=None)
    pc.add_argument("--features", type=str, default=None)
    pc.add_argument("--labels", type=str, default=None, help="ground truth, for evaluation only")
    pc.add_argument("--k", type=int, default=None)
    pc.add_argument("--alpha", type=float, default=None)
    pc.add_argument("--beta", type=float, default=None)
    pc.add_argument("--gamma", type=float, default=None)
    pc.add_argument("--lambda", dest="lambda", type=float, default=None)
    pc.add_argument("--max-iters", type=int, default=None)
    pc.add_argument("--rel-tol", type=float, default=None)
    pc.add_argument("--seed", type=int, default=None)
    pc.add_argument("--step-policy", choices=solver.STEP_POLICIES, default=None)
    pc.add_argument("--init", choices=solver.INIT_SCHEMES, default=None)
    pc.add_argument("--out-dir", type=str, default=None)
    pc.add_argument("--grid", action="store_true", help="search the weight grid, select by objective")
    pc.add_argument("--config", type=str, default=None, help="flat key=value config file")
    pc.set_defaults(func=cmd_cluster)

    pg = sub.add_parser("gen-sbm", help="generate a degree-corrected SBM benchmark dataset")
    pg.add_argument("--p", type=int, required=True)
    pg.add_argument("--k", type=int, required=True)
    pg.add_argument("--block-sizes", type=str, default=None)
    pg.add_argument("--expected-degree", type=float, default=20.0)
    pg.add_argument("--expected-sub-degree", type=float, default=2.0)
    pg.add_argument("--powerlaw-exponent", type=float, default=2.0)
    pg.add_argument("--theta-min", type=float, default=2.0)
    pg.add_argument("--theta-max", type=float, default=4.0)
    pg.add_argument("--feature-dim", type=int, default=128)
    pg.add_argument("--feature-groups", type=int, default=None)
    pg.add_argument("--class-sep", type=float, default=1.0)
    pg.add_argument("--seed", type=int, default=0)
    pg.add_argument("--out-dir", type=str, default=".")
    pg.set_defaults(func=cmd_gen_sbm)

    pe = sub.add_parser("eval", help="evaluate predicted labels against ground truth")
    pe.add_argument("--edges", type=str, required=True)
    pe.add_argument("--labels", type=str, required=True)
    pe.add_argument("--pred", type=str, required=True)
    pe.add_argument("--out", type=str, default=None)
    pe.set_defaults(func=cmd_eval)

    pb = sub.add_parser("bench", help="per-iteration scaling across graph sizes")
    pb.add_argument("--p-grid", type=str, default="500,1000,2000")
    pb.add_argument("--k", type=int, default=4)
    pb.add_argument("--feature-dim", type=int, default=64)
    pb.add_argument("--iters", type=int, default=15)
    pb.add_argument("--seed", type=int, default=0)
    pb.add_argument("--out", type=str, default=None)
    pb.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MagcError as exc:
        owner = _ERROR_OWNER.get(type(exc).__name__, "magc")
        print(f"error [{owner}.{type(exc).__name__}]: {exc}", file=sys.stderr)
        return _EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
