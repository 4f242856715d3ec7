"""Command-line entry point: ``tada <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import expander, sketch, sparsify
from .errors import DataError, TadaError, VerificationError
from .graph import load_attributes, load_labels, load_matrix, read_edge_list, save_matrix
from .pipeline import (PipelineConfig, bench_sketch, bench_sparsify, erdos_renyi, eval_downstream,
                       generate_sbm, parse_config_text, run_pipeline, save_dataset)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3

# flag name -> PipelineConfig field
CONFIG_FLAGS = {
    "k": "k", "h": "h", "gamma": "gamma", "beta": "beta", "alpha": "alpha",
    "walk_steps": "T", "centroids": "c_size", "rho": "rho", "pretrain_epochs": "n_p",
    "lr": "lr", "seed": "seed", "layers": "layers", "eval_epochs": "eval_epochs",
}


class UsageError(TadaError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_config_flags(p):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--k", type=int)
    p.add_argument("--h", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--walk-steps", type=int)
    p.add_argument("--centroids", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--pretrain-epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--eval-epochs", type=int)
    p.add_argument("--out-dir")


def _add_inputs(p, features=True, labels=True):
    p.add_argument("--edges", required=True, help="edge list (u v per line)")
    if features:
        p.add_argument("--features", required=True, help="attribute matrix (TADA binary or CSV)")
    if labels:
        p.add_argument("--labels", required=True)
        p.add_argument("--splits", required=True)


def build_parser():
    parser = _Parser(prog="tada", description="Topology/attribute-aware graph preprocessing.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-sbm", help="write a synthetic SBM dataset")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--blocks", type=int, default=2)
    p.add_argument("--p-in", type=float, default=0.16)
    p.add_argument("--p-out", type=float, default=0.01)
    p.add_argument("--attr-dim", type=int, default=16)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("sketch", help="build the hybrid sketched adjacency")
    _add_inputs(p, features=False, labels=False)
    _add_config_flags(p)

    p = sub.add_parser("pretrain", help="pre-train the feature expander")
    _add_inputs(p)
    p.add_argument("--sketch", help="precomputed sketch (otherwise built from the graph)")
    _add_config_flags(p)

    p = sub.add_parser("sparsify", help="reweight and sparsify a graph from H0")
    p.add_argument("--edges", required=True)
    p.add_argument("--h0", required=True, help="initial features matrix")
    _add_config_flags(p)

    p = sub.add_parser("pipeline", help="full sketch -> pretrain -> sparsify run")
    _add_inputs(p)
    p.add_argument("--evaluate", action="store_true",
                   help="also report downstream accuracy against the raw baseline")
    _add_config_flags(p)

    p = sub.add_parser("eval", help="linear-propagation downstream accuracy")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--edges")
    group.add_argument("--weighted-edges", help="u<TAB>v<TAB>w list from `sparsify`")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--splits", required=True)
    _add_config_flags(p)

    p = sub.add_parser("verify", help="run the dense oracle checks")
    p.add_argument("--seed", type=int)
    p.add_argument("--graphs", type=int, default=10, help="random graphs per check")

    p = sub.add_parser("bench", help="sketch/sparsify timings")
    p.add_argument("--edges", help="edge list; otherwise a random graph is generated")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--avg-degree", type=float, default=20.0)
    p.add_argument("--reps", type=int, default=5)
    _add_config_flags(p)
    return parser


def resolve_config(args):
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        cfg = cfg.updated(**parse_config_text(Path(args.config).read_text(encoding="utf-8")))
    env_seed = os.environ.get("TADA_SEED")
    if env_seed is not None:
        try:
            cfg = cfg.updated(seed=int(env_seed))
        except ValueError:
            raise UsageError(f"TADA_SEED={env_seed!r} is not an integer") from None
    overrides = {field: getattr(args, flag, None) for flag, field in CONFIG_FLAGS.items()}
    return cfg.updated(**overrides)


def _emit(payload, out_dir=None, name="report.json"):
    text = json.dumps(payload, indent=2, sort_keys=True, default=_jsonable)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text + "\n", encoding="utf-8")
    print(text)


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _load_inputs(args):
    g, load = read_edge_list(args.edges)
    X = load_attributes(args.features, g.n) if hasattr(args, "features") else None
    y = load_labels(args.labels, args.splits, g.n) if hasattr(args, "labels") else None
    return g, load, X, y


def _out_dir(args):
    out = Path(args.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen_sbm(args):
    seed = args.seed if args.seed is not None else int(os.environ.get("TADA_SEED", 0))
    g, X, y = generate_sbm(args.n, args.blocks, args.p_in, args.p_out, args.attr_dim,
                           args.noise, seed)
    save_dataset(args.out_dir, g, X, y)
    _emit({"n": g.n, "m": g.m, "avg_degree": 2 * g.m / g.n, "seed": seed})


def _build_sketch(g, cfg):
    cfg.validate(g.n)
    cs = sketch.build_count_sketch(g.n, cfg.k, cfg.seed)
    rs = sketch.build_rwr_sketch(g, cfg.k, cfg.candidate_size(g.n), cfg.T, cfg.alpha, cfg.seed)
    return sketch.hybrid_sketch(g, cs, rs, cfg.beta, {"alpha": cfg.alpha, "T": cfg.T}), rs


def cmd_sketch(args):
    cfg = resolve_config(args)
    g, load, _, _ = _load_inputs(args)
    sk, rs = _build_sketch(g, cfg)
    out = _out_dir(args)
    sketch.save_sketch(sk, out / "sketch.bin")
    _emit({"n": g.n, "m": g.m, "duplicates": load.duplicates, "self_loops": load.self_loops,
           "unreachable_nodes": rs.unreachable, "sketch": str(out / "sketch.bin"),
           **sk.provenance})


def cmd_pretrain(args):
    cfg = resolve_config(args)
    g, _, X, y = _load_inputs(args)
    sk = sketch.load_sketch(args.sketch) if args.sketch else _build_sketch(g, cfg)[0]
    if sk.n != g.n:
        raise DataError(f"sketch has {sk.n} rows, graph has {g.n} nodes")
    pcfg = expander.PretrainConfig(cfg.h, cfg.gamma, cfg.n_p, cfg.lr, cfg.seed)
    params, feats = expander.pretrain(sk, expander.standardize_columns(X), y, pcfg)
    out = _out_dir(args)
    expander.save_params(params, out / "params.bin")
    save_matrix(out / "h0.bin", feats.H0)
    _emit({"epochs": cfg.n_p, "final_loss": feats.loss_trace[-1] if feats.loss_trace else None,
           "h0": str(out / "h0.bin")})


def cmd_sparsify(args):
    cfg = resolve_config(args)
    g, _ = read_edge_list(args.edges)
    H0 = load_matrix(args.h0)
    sg = sparsify.sparsify(sparsify.reweight_edges(g, H0), cfg.rho)
    out = _out_dir(args)
    sparsify.save_sparsified(sg, out / "sparsified.tsv", out / "sparsify_stats.json")
    _emit(sg.stats())


def cmd_pipeline(args):
    cfg = resolve_config(args)
    g, _, X, y = _load_inputs(args)
    sg, feats, report = run_pipeline(cfg, g, X, y, out_dir=args.out_dir)
    if args.evaluate:
        report.accuracies["tada"] = eval_downstream(sg, feats, y, cfg.layers, cfg.eval_epochs,
                                                    cfg.eval_lr, cfg.seed)
        report.accuracies["raw"] = eval_downstream(g, X, y, cfg.layers, cfg.eval_epochs,
                                                   cfg.eval_lr, cfg.seed)
    payload = json.loads(report.to_json())
    _emit(payload, args.out_dir)


def cmd_eval(args):
    cfg = resolve_config(args)
    if args.weighted_edges:
        graph = sparsify.load_weighted_edge_list(args.weighted_edges)
    else:
        graph = read_edge_list(args.edges)[0]
    F = load_attributes(args.features, graph.n)
    y = load_labels(args.labels, args.splits, graph.n)
    acc = eval_downstream(graph, F, y, cfg.layers, cfg.eval_epochs, cfg.eval_lr, cfg.seed)
    _emit({"accuracy": acc, "layers": cfg.layers})


def cmd_verify(args):
    from .verify import run_checks

    seed = args.seed if args.seed is not None else int(os.environ.get("TADA_SEED", 0))
    results = run_checks(seed=seed, graphs=args.graphs)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise VerificationError(f"{len(failed)} check(s) failed: {', '.join(failed)}")


def cmd_bench(args):
    cfg = resolve_config(args)
    if args.edges:
        g = read_edge_list(args.edges)[0]
    else:
        g = erdos_renyi(args.n, min(1.0, args.avg_degree / max(args.n - 1, 1)), cfg.seed)
    k = min(cfg.k, g.n)
    result = bench_sketch(g, k, args.reps, T=cfg.T, alpha=cfg.alpha, seed=cfg.seed)
    result.update({key: val for key, val in
                   bench_sparsify(g, cfg.h, cfg.rho, args.reps, cfg.seed).items()
                   if key == "sparsify_ms"})
    _emit(result, args.out_dir, "bench.json")


COMMANDS = {
    "gen-sbm": cmd_gen_sbm, "sketch": cmd_sketch, "pretrain": cmd_pretrain,
    "sparsify": cmd_sparsify, "pipeline": cmd_pipeline, "eval": cmd_eval,
    "verify": cmd_verify, "bench": cmd_bench,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"tada: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VerificationError as exc:
        print(f"tada: verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (DataError, TadaError, OSError) as exc:
        print(f"tada: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
