"""Command-line entry point.

Exit codes: 0 ok, 1 usage, 2 correctness alarm, 3 I/O or malformed input.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path
from typing import Optional

from .bench import CorrectnessAlarm, bench
from .decomposer import (
    ALL_STRATEGIES, AUTO, DEFAULT_THRESHOLD, PATH, SINGLE, Strategy,
    select_strategy, single_edge_tree, tree_for,
)
from .engine import Engine, EngineConfig, RunMetrics
from .graph_store import load_stream, parse_window, read_stream, write_stream
from .oracle import ANCHORED, FULL, incremental_diff_check
from .query_model import QueryError, load_query, match_span, write_query
from .selectivity import (
    EDGE, MapConfig, SelectivityTable, UndefinedSelectivity, estimate_table,
    expected_selectivity, read_stats, relative_selectivity, warmup_length,
    write_stats,
)
from .sjtree import SJTree, TreeError
from .workload import (
    QuerySpec, generate_queries, iter_stream, parse_stream_spec,
)

log = logging.getLogger("sjstream")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ALARM = 2
EXIT_IO = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _map_config(args) -> MapConfig:
    attrs = tuple(a for a in (getattr(args, "map_attrs", None) or "").split(",") if a)
    return MapConfig(attributes=attrs, vertex_labels=getattr(args, "map_vertex_labels", False),
                     mode="hash" if getattr(args, "map_hash", False) else "identity")


def _add_map_flags(p):
    p.add_argument("--map-attrs", help="comma-separated attributes folded into edge types")
    p.add_argument("--map-vertex-labels", action="store_true",
                   help="fold endpoint vertex labels into edge types")
    p.add_argument("--map-hash", action="store_true", help="hash composed edge types")


def _open_out(path: Optional[str]):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def _read_stream_arg(path: str):
    if path == "-":
        return read_stream(sys.stdin)
    return load_stream(path)


def _load_tree(args, query, table: Optional[SelectivityTable], cfg) -> SJTree:
    if args.tree:
        return SJTree.loads(Path(args.tree).read_text(encoding="utf-8"), query)
    if table is None:
        table = SelectivityTable()
    strategy = Strategy(getattr(args, "strategy", SINGLE) or SINGLE, "lazy")
    return tree_for(strategy, query, table, cfg)[0]


def _engine_strategy(tree: SJTree, mode: str) -> Strategy:
    path = any(len(es) > 1 for es in tree.leaf_edge_sets())
    return Strategy(PATH if path else SINGLE, mode)


# -- subcommands -------------------------------------------------------------

def cmd_stats(args) -> int:
    cfg = _map_config(args)
    stream = load_stream(args.stream)
    n = len(stream) if args.all else (args.prefix or warmup_length(len(stream), args.fraction))
    table = estimate_table(stream[:n], cfg)
    write_stats(args.output, table)
    log.info("counted %d edges over a %d-edge prefix", table.total(EDGE), n)
    return EXIT_OK


def cmd_decompose(args) -> int:
    cfg = _map_config(args)
    query = load_query(args.query)
    table = read_stats(args.stats)
    if args.strategy == AUTO:
        choice = select_strategy(query, table, args.threshold, cfg)
        tree, chosen = choice.tree, choice.strategy
    else:
        tree, chosen = tree_for(Strategy(args.strategy, "lazy"), query, table, cfg)
    s_hat = expected_selectivity(tree, table, cfg)
    try:
        xi = f"{relative_selectivity(tree, single_edge_tree(query, table, cfg), table, cfg):.6g}"
    except UndefinedSelectivity:
        xi = "undefined"
    text = tree.dumps()
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    print(f"expected_selectivity={s_hat:.6g} relative_selectivity={xi} chosen={chosen.name}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _map_config(args)
    query = load_query(args.query)
    table = read_stats(args.stats) if args.stats else None
    tree = _load_tree(args, query, table, cfg)
    window = parse_window(args.window) if args.window else None
    out, close_out = _open_out(args.out)
    count = 0

    def sink(ev):
        nonlocal count
        count += 1
        out.write(ev.format() + "\n")

    engine = Engine(tree, EngineConfig(_engine_strategy(tree, args.mode), window), sink)
    try:
        metrics = engine.run(_read_stream_arg(args.stream))
    finally:
        if close_out:
            out.close()
    if args.metrics:
        _write_metrics(args.metrics, metrics)
    log.info("%d matches over %d edges", count, metrics.edges)
    return EXIT_OK


def _write_metrics(path: str, metrics: RunMetrics) -> None:
    row = metrics.as_row()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(row))
        writer.writeheader()
        writer.writerow(row)


def cmd_check(args) -> int:
    cfg = _map_config(args)
    query = load_query(args.query)
    table = read_stats(args.stats) if args.stats else None
    tree = _load_tree(args, query, table, cfg)
    window = parse_window(args.window) if args.window else query.window
    stream = _read_stream_arg(args.stream)
    stream = list(stream)
    events: list = []
    engine = Engine(tree, EngineConfig(_engine_strategy(tree, args.mode), window),
                    events.append)
    engine.run(stream)
    report = incremental_diff_check(stream, query, events, window)
    wide = [ev for ev in events if match_span(ev.match) >= window]
    if wide:
        report.passed = False
        sys.stderr.write(f"{len(wide)} emitted matches span at least the window\n")
    if not report.passed:
        sys.stderr.write(report.describe() + "\n")
        return EXIT_ALARM
    print(report.describe())
    return EXIT_OK


def _query_files(paths) -> list:
    files = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            files.extend(sorted(p.glob("*.qg")))
        elif p.exists():
            files.append(p)
        else:
            raise FileNotFoundError(f"no such query file or directory: {p}")
    return files


def cmd_bench(args) -> int:
    cfg = _map_config(args)
    stream = load_stream(args.stream)
    files = _query_files(args.queries)
    if not files:
        raise UsageError("no query files given")
    queries = [load_query(f) for f in files]
    strategies = [Strategy.parse(s.strip()) for s in args.strategies.split(",") if s.strip()]
    table = read_stats(args.stats) if args.stats else None
    window = parse_window(args.window) if args.window else None
    report = bench(stream, queries, strategies, window, table, cfg,
                   args.threshold, oracle=not args.no_oracle,
                   oracle_prefix=args.oracle_prefix, oracle_mode=args.oracle_mode,
                   names=[f.stem for f in files])
    text = report.to_csv()
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_gen_stream(args) -> int:
    spec = parse_stream_spec(Path(args.spec).read_text(encoding="utf-8"))
    if args.seed is not None:
        spec.seed = args.seed
    if args.edges is not None:
        spec.edges = args.edges
    write_stream(args.output, iter_stream(spec))
    return EXIT_OK


def _labels_from_table(table: SelectivityTable) -> tuple:
    return tuple(sorted({k.arms[0][0] for k in table.keys(EDGE)}))


def _read_triples(path: str) -> tuple:
    triples = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cols = line.split()
        if len(cols) != 3:
            raise QueryError(f"triple line needs 3 fields: {line!r}")
        triples.append(tuple(cols))
    return tuple(triples)


def cmd_gen_queries(args) -> int:
    cfg = _map_config(args)
    table = read_stats(args.stats)
    labels = tuple(args.labels.split(",")) if args.labels else _labels_from_table(table)
    triples = _read_triples(args.triples) if args.triples else ()
    spec = QuerySpec(args.shape, args.size, labels, triples,
                     parse_window(args.window), args.seed)
    queries = generate_queries(spec, table, args.n, cfg, args.pool)
    os.makedirs(args.output, exist_ok=True)
    for i, q in enumerate(queries):
        write_query(Path(args.output) / f"{spec.group}-{i:03d}.qg", q)
    print(f"wrote {len(queries)} queries to {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sjstream", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("stats", help="count edge types and 2-edge paths over a prefix")
    p.add_argument("--stream", required=True)
    p.add_argument("--prefix", type=int, help="prefix length in edges")
    p.add_argument("--fraction", type=float, default=0.1,
                   help="warm-up fraction when --prefix is absent (capped at 1M edges)")
    p.add_argument("--all", action="store_true", help="count the whole stream")
    p.add_argument("-o", "--output", required=True)
    _add_map_flags(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("decompose", help="build an SJ-Tree for a query")
    p.add_argument("--query", required=True)
    p.add_argument("--stats", required=True)
    p.add_argument("--strategy", choices=(SINGLE, PATH, AUTO), default=AUTO)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("-o", "--output")
    _add_map_flags(p)
    p.set_defaults(func=cmd_decompose)

    for name, func, doc in (("run", cmd_run, "stream edges through the engine"),
                            ("check", cmd_check, "diff engine output against the oracle")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--stream", required=True, help="TSV stream file, or - for stdin")
        p.add_argument("--query", required=True)
        p.add_argument("--tree", help="serialized SJ-Tree; built from --stats otherwise")
        p.add_argument("--stats")
        p.add_argument("--strategy", choices=(SINGLE, PATH, AUTO), default=SINGLE,
                       help="decomposition when no --tree is given")
        p.add_argument("--mode", choices=("eager", "lazy"), default="lazy")
        p.add_argument("--window", help="override the query window (number or inf)")
        _add_map_flags(p)
        if name == "run":
            p.add_argument("--out", help="match output (TSV); stdout by default")
            p.add_argument("--metrics", help="metrics CSV")
        p.set_defaults(func=func)

    p = sub.add_parser("bench", help="compare strategies against the oracle")
    p.add_argument("--stream", required=True)
    p.add_argument("--queries", nargs="+", required=True, help="query files or directories")
    p.add_argument("--strategies", default=",".join(s.name for s in ALL_STRATEGIES))
    p.add_argument("--stats")
    p.add_argument("--window")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--oracle-prefix", type=int,
                   help="run the oracle on this many edges and extrapolate")
    p.add_argument("--oracle-mode", choices=(ANCHORED, FULL), default=ANCHORED,
                   help="anchored: search around each new edge; full: re-enumerate the window")
    p.add_argument("--no-oracle", action="store_true")
    p.add_argument("-o", "--output")
    _add_map_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen-stream", help="generate a synthetic stream")
    p.add_argument("--spec", required=True, help="key=value spec file")
    p.add_argument("--seed", type=int)
    p.add_argument("--edges", type=int)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen_stream)

    p = sub.add_parser("gen-queries", help="generate a query set")
    p.add_argument("--shape", choices=("path", "binary-tree", "n-ary-tree"), default="path")
    p.add_argument("--size", type=int, default=3)
    p.add_argument("--stats", required=True)
    p.add_argument("-n", type=int, default=25)
    p.add_argument("--labels", help="comma-separated edge labels (default: from stats)")
    p.add_argument("--triples", help="schema file of 'src_label edge_label dst_label' lines")
    p.add_argument("--window", default="inf")
    p.add_argument("--pool", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    _add_map_flags(p)
    p.set_defaults(func=cmd_gen_queries)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except CorrectnessAlarm as exc:
        sys.stderr.write(f"correctness alarm: {exc}\n")
        return EXIT_ALARM
    except (OSError, ValueError, QueryError, TreeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
