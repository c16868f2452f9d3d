"""Command-line surface: gen, gt, build, bench, stats.

All randomness flows from --seed (default 0). Configuration is flags only,
so recorded command lines reproduce runs exactly. Every command exits
nonzero with a one-line diagnostic on malformed input.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import _kernels
from .bench import brute_force_knn_batch, rows_to_csv, rows_to_json, run_benchmark
from .build_approx import BuildParams, build_approx
from .build_exact import EXACT_BUILD_GUARD, audit_exact_graph, build_exact
from .data import Dataset, read_fvecs, read_ivecs, write_fvecs, write_ivecs, GroundTruth
from .graph import degree_stats, reachable_set
from .quantize import QuantizedIndex, build_quantized
from .storage import load_index, save_index
from .data import gen_synthetic

log = logging.getLogger("emgraph")


def _parse_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _parse_ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def cmd_gen(args) -> int:
    ds = gen_synthetic(args.n, args.d, args.dist, args.seed, clusters=args.clusters)
    write_fvecs(args.out, ds)
    log.info("wrote %d x %d vectors to %s", ds.n, ds.d, args.out)
    return 0


def _dist_out_path(out: str) -> str:
    base = out[: -len(".ivecs")] if out.endswith(".ivecs") else out
    return base + ".dist.fvecs"


def cmd_gt(args) -> int:
    base = read_fvecs(args.base)
    queries = read_fvecs(args.queries)
    if args.k > base.n:
        raise ValueError(f"k={args.k} exceeds base size {base.n}")
    if queries.d != base.d:
        raise ValueError(f"query dimension {queries.d} != base dimension {base.d}")
    gt = brute_force_knn_batch(base, queries.data, args.k)
    write_ivecs(args.out, gt.ids)
    dist_out = args.dist_out or _dist_out_path(args.out)
    write_fvecs(dist_out, gt.distances)
    log.info("wrote top-%d ids to %s, distances to %s", args.k, args.out, dist_out)
    return 0


def cmd_build(args) -> int:
    base = read_fvecs(args.base)
    if args.threads:
        _kernels.set_threads(args.threads)
    if args.mode == "exact":
        if base.n > EXACT_BUILD_GUARD and not args.force:
            raise ValueError(
                f"exact build on {base.n} points is O(n^2 log n); pass --force to proceed")
        delta = args.delta if args.delta is not None else 0.05
        index = build_exact(base, delta)
        if args.audit:
            bad = audit_exact_graph(index, base, delta)
            if bad:
                raise ValueError(f"construction-rule audit failed on pairs {bad[:5]}")
            log.info("construction-rule audit passed for all %d ordered pairs",
                     base.n * (base.n - 1))
    else:
        params = BuildParams(m_cap=args.M, big_l=args.L, t=args.t,
                             iterations=args.iters, seed=args.seed,
                             bootstrap=args.bootstrap, fixed_delta=args.delta)
        if args.mode == "approx":
            index = build_approx(base, params, threads=args.threads)
        else:
            index = build_quantized(base, params, seed=args.seed,
                                    batch_width=args.batch_width,
                                    threads=args.threads)
    save_index(args.out, index, d=base.d)
    graph = index.graph if isinstance(index, QuantizedIndex) else index
    log.info("built %s index: n=%d entry=%d mean degree %.2f -> %s",
             args.mode, graph.n, graph.entry, graph.degrees().mean(), args.out)
    return 0


def cmd_bench(args) -> int:
    index = load_index(args.index)
    base = read_fvecs(args.base)
    queries = read_fvecs(args.queries)
    ids = read_ivecs(args.gt)
    dist_path = args.gt_dist or _dist_out_path(args.gt)
    try:
        dists = read_fvecs(dist_path).data
    except OSError:
        dists = None
        log.warning("no ground-truth distances at %s; recall will ignore ties", dist_path)
    gt = GroundTruth(ids=ids, distances=dists)
    rows = run_benchmark(index, base, queries.data, gt,
                         alphas=_parse_floats(args.alpha_sweep),
                         ks=_parse_ints(args.k), repeats=args.repeats)
    if args.out:
        (rows_to_csv if args.format == "csv" else rows_to_json)(rows, args.out)
        log.info("wrote %d rows to %s", len(rows), args.out)
    else:
        for row in rows:
            print(row.to_dict())
    return 0


def cmd_stats(args) -> int:
    index = load_index(args.index)
    graph = index.graph if isinstance(index, QuantizedIndex) else index
    stats = degree_stats(graph)
    reachable = len(reachable_set(graph, graph.entry))
    meta = graph.meta
    print(f"mode: {meta.mode}")
    print(f"n: {graph.n}  M: {graph.m_cap}  entry: {graph.entry}")
    print(f"degrees: min={stats['min']} max={stats['max']} mean={stats['mean']:.3f}")
    print(f"reachable from entry: {reachable}/{graph.n}")
    print(f"params: delta={meta.delta} t={meta.t} L={meta.L} "
          f"iterations={meta.iterations} seed={meta.seed} bootstrap={meta.bootstrap} "
          f"batch_width={meta.batch_width}")
    hist = ", ".join(f"{deg}:{cnt}" for deg, cnt in sorted(stats["histogram"].items()))
    print(f"degree histogram: {hist}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emgraph",
                                     description="Error-bounded monotonic graph ANN toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic fvecs dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--dist", choices=["uniform", "gaussian-mixture"], default="uniform")
    p.add_argument("--clusters", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("gt", help="brute-force ground truth for a query file")
    p.add_argument("--base", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--out", required=True)
    p.add_argument("--dist-out", default=None,
                   help="distance file (default: <out>.dist.fvecs)")
    p.set_defaults(func=cmd_gt)

    p = sub.add_parser("build", help="build an index over an fvecs base file")
    p.add_argument("--base", required=True)
    p.add_argument("--mode", choices=["exact", "approx", "quantized"], default="approx")
    p.add_argument("--delta", type=float, default=None,
                   help="exact-mode delta (default 0.05); with approx/quantized modes, "
                        "build with this fixed delta instead of the adaptive rule")
    p.add_argument("--t", type=int, default=16, help="adaptive-delta scale rank")
    p.add_argument("--M", type=int, default=64, help="max out-degree")
    p.add_argument("--L", type=int, default=1000, help="candidate set size")
    p.add_argument("--iters", type=int, default=3)
    p.add_argument("--batch-width", type=int, default=32)
    p.add_argument("--bootstrap", choices=["exact-knn", "random-regular"],
                   default="exact-knn")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--audit", action="store_true",
                   help="exact mode: verify the construction rule pair-exhaustively")
    p.add_argument("--force", action="store_true",
                   help="allow exact builds beyond the size guard")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("bench", help="run the benchmark loop over a query file")
    p.add_argument("--index", required=True)
    p.add_argument("--base", required=True, help="fvecs base file the index was built on")
    p.add_argument("--queries", required=True)
    p.add_argument("--gt", required=True, help="ivecs ground-truth ids")
    p.add_argument("--gt-dist", default=None,
                   help="fvecs ground-truth distances (default: <gt>.dist.fvecs)")
    p.add_argument("--k", default="10", help="comma-separated result sizes")
    p.add_argument("--alpha-sweep", default="1.2,1.5,2.0", help="comma-separated alphas")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--repeats", type=int, default=5, help="timing repetitions")
    p.add_argument("--out", default=None, help="output path (default: print rows)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("stats", help="degree distribution, connectivity and meta dump")
    p.add_argument("--index", required=True)
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
