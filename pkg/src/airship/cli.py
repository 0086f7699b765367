"""Command-line harness: ``airship <subcommand> [flags]``.

Exit codes: 0 success, 2 configuration/input error, 3 checksum mismatch.
Any flag may also come from a flat ``key=value`` file given with
``--config``; flags on the command line win.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

import numpy as np

from . import bench as _bench
from .constraints import (
    Constraint,
    ConstraintFamily,
    load_constraints,
    save_constraints,
    synthesize_constraints,
)
from .dataset import (
    LabelingConfig,
    assign_cluster_labels,
    load_fvecs,
    load_labels,
    nearest_centroid,
    randomize_labels,
    save_labels,
)
from .errors import AirshipError, ChecksumMismatchError
from .graph import BuildParams, build_graph, load_graph, save_graph
from .metrics import generate_ground_truth, load_ground_truth, save_ground_truth
from .search import SearchParams, estimate_alter_ratio, sampled_satisfied, search

log = logging.getLogger("airship")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECKSUM = 3


class ConfigError(AirshipError):
    pass


def _int_list(text):
    return [int(t) for t in str(text).split(",") if t.strip()]


def _str_list(text):
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _ratio_list(text):
    out = []
    for tok in _str_list(text):
        out.append(_bench.ESTIMATED if tok in ("est", "estimated") else float(tok))
    return out


def read_config_file(path) -> dict:
    cfg = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: line {lineno} is not key=value")
            key, value = line.split("=", 1)
            cfg[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return cfg


def _need(args, *names):
    for name in names:
        if getattr(args, name, None) in (None, ""):
            raise ConfigError(f"missing required flag --{name.replace('_', '-')}")


def _load_dataset(args, labeled=True):
    ds = load_fvecs(args.data)
    if ds.n == 0:
        raise ConfigError(f"{args.data}: dataset is empty")
    if labeled:
        labels = load_labels(args.labels)
        if labels.size != ds.n:
            raise ConfigError(f"{args.labels}: {labels.size} labels for {ds.n} vectors")
        ds = ds.with_labels(labels)
    return ds


def cmd_build(args):
    _need(args, "data", "out")
    ds = _load_dataset(args, labeled=False)
    t0 = time.perf_counter()
    graph = build_graph(ds, BuildParams(args.degree, args.ef, args.sample, args.seed))
    save_graph(graph, args.out)
    print(f"build: n={ds.n} d={ds.d} elapsed={time.perf_counter() - t0:.2f}s -> {args.out}")


def cmd_labels(args):
    _need(args, "data", "out")
    ds = _load_dataset(args, labeled=False)
    t0 = time.perf_counter()
    centers = []
    cfg = LabelingConfig(args.k, args.randomness, args.iters, args.seed)
    labels = assign_cluster_labels(ds, cfg, centers_out=centers)
    save_labels(labels, args.out)
    print(f"labels: n={ds.n} d={ds.d} elapsed={time.perf_counter() - t0:.2f}s -> {args.out}")
    if args.queries:
        _need(args, "query_out")
        Q = load_fvecs(args.queries)
        rng = np.random.default_rng([args.seed, 1])
        qlabels = randomize_labels(nearest_centroid(Q.vectors, centers[0]), args.k,
                                   args.randomness, rng)
        save_labels(qlabels, args.query_out)
        print(f"labels: queries n={Q.n} -> {args.query_out}")


def cmd_constraints(args):
    _need(args, "query_labels", "out")
    qlabels = load_labels(args.query_labels)
    num_labels = args.num_labels
    if num_labels is None:
        num_labels = int(load_labels(args.labels).max()) + 1 if args.labels else int(qlabels.max()) + 1
    t0 = time.perf_counter()
    family = ConstraintFamily(args.family, args.pct, args.seed)
    cons = synthesize_constraints(family, qlabels, num_labels)
    save_constraints(cons, args.out)
    print(f"constraints: {family.name} n={len(cons)} labels={num_labels} "
          f"elapsed={time.perf_counter() - t0:.2f}s -> {args.out}")


def cmd_groundtruth(args):
    _need(args, "data", "labels", "queries", "constraints", "out")
    ds = _load_dataset(args)
    Q = load_fvecs(args.queries)
    cons = load_constraints(args.constraints)
    if Q.n != len(cons):
        raise ConfigError(f"{Q.n} queries but {len(cons)} constraints")
    t0 = time.perf_counter()
    gt = generate_ground_truth(ds, Q.vectors, cons, args.K)
    save_ground_truth(gt, args.out)
    print(f"groundtruth: n={ds.n} d={ds.d} queries={Q.n} K={args.K} "
          f"elapsed={time.perf_counter() - t0:.2f}s -> {args.out}")


def _load_workload(args):
    ds = _load_dataset(args)
    graph = load_graph(args.index, expected_checksum=ds.checksum())
    Q = load_fvecs(args.queries)
    cons = load_constraints(args.constraints)
    if Q.n != len(cons):
        raise ConfigError(f"{Q.n} queries but {len(cons)} constraints")
    if Q.n and Q.d != ds.d:
        raise ConfigError(f"queries have dimension {Q.d}, data has {ds.d}")
    return ds, graph, Q.vectors, cons


def cmd_bench(args):
    _need(args, "data", "labels", "index", "queries", "constraints", "groundtruth")
    config = _bench.BenchConfig(
        variants=_str_list(args.variants), Ks=_int_list(args.K),
        ratios=_ratio_list(args.ratios), family=args.family, repetitions=args.repetitions,
        seed=args.seed, ef=args.ef, max_visit=args.max_visit,
        estimator_k=args.estimator_k, threads=args.threads,
    )
    ds, graph, queries, cons = _load_workload(args)
    gt = load_ground_truth(args.groundtruth)
    gt.verify(queries, cons, ds)
    if config.threads > 1:
        log.warning("--threads %d: QPS is not comparable to single-thread runs", config.threads)
    records = _bench.run_bench(graph, ds, queries, cons, gt, config)
    text = _bench.records_to_csv(records)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        print(f"bench: {len(records)} records -> {args.out}")
    else:
        sys.stdout.write(text)


def cmd_estimate(args):
    _need(args, "index", "labels", "constraints")
    labels = load_labels(args.labels)
    graph = load_graph(args.index)
    if labels.size != graph.n:
        raise ConfigError(f"{args.labels}: {labels.size} labels for an index of {graph.n}")
    # only adjacency and labels are read; no vectors, no distances
    rows = ["constraint,ssv,estimate"]
    for i, c in enumerate(load_constraints(args.constraints)):
        starts = sampled_satisfied(graph, labels, c)
        if starts.size == 0:
            rows.append(f"{i},0,fallback")
            continue
        est = estimate_alter_ratio(graph, labels, c, starts, args.estimator_k)
        rows.append(f"{i},{starts.size},{est!r}")
    text = "\n".join(rows) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
    sys.stdout.write(text)


def cmd_search(args):
    _need(args, "data", "labels", "index", "allow")
    ds = _load_dataset(args)
    graph = load_graph(args.index, expected_checksum=ds.checksum())
    if args.vector:
        q = np.array([float(t) for t in _str_list(args.vector)])
    else:
        _need(args, "queries")
        q = load_fvecs(args.queries).vectors[args.query_id]
    ratio = args.ratio
    params = SearchParams(
        K=args.K, variant=args.variant,
        alter_ratio=0.5 if ratio in ("est", "estimated") else float(ratio),
        alter_ratio_mode="estimated" if ratio in ("est", "estimated") else "fixed",
        estimator_k=args.estimator_k, max_visit=args.max_visit, rng_seed=args.seed, ef=args.ef,
    )
    res = search(graph, ds, q, Constraint(_int_list(args.allow)), params)
    for rank, (vid, dist) in enumerate(res.hits):
        print(f"{rank}\t{vid}\t{dist!r}")
    s = res.stats
    print(f"# dist_comps={s.distance_computations} popped={s.vertices_popped} "
          f"satisfied_popped={s.satisfied_popped} terminated_by={s.terminated_by} "
          f"fallback={s.fallback} skipped={res.skipped}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="airship", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="flat key=value file supplying flag values")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *names):
        for name in names:
            p.add_argument(f"--{name}")

    p = sub.add_parser("build", help="build a proximity-graph index")
    common(p, "data", "out")
    p.add_argument("--degree", type=int, default=16)
    p.add_argument("--ef", type=int, default=128)
    p.add_argument("--sample", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("labels", help="k-means labels with R%% randomness")
    common(p, "data", "out", "queries", "query-out")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--randomness", type=float, default=0.0)
    p.add_argument("--iters", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_labels)

    p = sub.add_parser("constraints", help="synthesize equal / unequal-X%% constraints")
    common(p, "query-labels", "labels", "out")
    p.add_argument("--family", choices=("equal", "unequal"), default="equal")
    p.add_argument("--pct", type=float, default=10.0)
    p.add_argument("--num-labels", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_constraints)

    p = sub.add_parser("groundtruth", help="exact constrained top-K by brute force")
    common(p, "data", "labels", "queries", "constraints", "out")
    p.add_argument("--K", type=int, default=100)
    p.set_defaults(func=cmd_groundtruth)

    p = sub.add_parser("bench", help="recall/QPS sweep, CSV output")
    common(p, "data", "labels", "index", "queries", "constraints", "groundtruth", "out")
    p.add_argument("--variants", default=",".join(_bench.VARIANTS))
    p.add_argument("--K", default="1,10,100")
    p.add_argument("--ratios", default="0.2,0.4,0.6,0.8,1.0,est")
    p.add_argument("--family", default="custom")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ef", type=int, default=0)
    p.add_argument("--max-visit", type=int, default=0)
    p.add_argument("--estimator-k", type=int, default=10)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("estimate", help="per-constraint estimated alter_ratio")
    common(p, "index", "labels", "constraints", "out")
    p.add_argument("--estimator-k", type=int, default=10)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("search", help="run one ad-hoc constrained query")
    common(p, "data", "labels", "index", "queries", "vector", "allow")
    p.add_argument("--query-id", type=int, default=0)
    p.add_argument("--variant", default="alter_prefer")
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--ratio", default="est")
    p.add_argument("--ef", type=int, default=0)
    p.add_argument("--max-visit", type=int, default=0)
    p.add_argument("--estimator-k", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_search)
    return parser


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return parser.parse_args(argv)
    cfg = read_config_file(known.config)
    args = parser.parse_args(argv)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    explicit = {a.dest for a in sub._actions
                if any(tok == opt or tok.startswith(opt + "=")
                       for opt in a.option_strings for tok in argv)}
    actions = {a.dest: a for a in sub._actions}
    for key, value in cfg.items():
        if key not in actions:
            raise ConfigError(f"{known.config}: unknown key {key!r} for '{args.command}'")
        if key in explicit:
            continue
        conv = actions[key].type or str
        try:
            setattr(args, key, conv(value))
        except ValueError:
            raise ConfigError(f"{known.config}: bad value for {key}: {value!r}") from None
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        args.func(args)
    except ChecksumMismatchError as exc:
        print(f"airship: checksum mismatch: {exc}", file=sys.stderr)
        return EXIT_CHECKSUM
    except (AirshipError, OSError, ValueError) as exc:
        print(f"airship: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
