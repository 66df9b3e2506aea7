"""Distributional statistics of 1-edge and 2-edge-path primitives.

Counts come from a prefix of the stream and are then frozen.  Edge types are
produced by ``map_edge``, which folds the label, chosen attributes and
(optionally) endpoint vertex labels into a single symbol.  Path keys carry the
orientation of each arm relative to the shared center vertex.
"""

from __future__ import annotations

import csv
import logging
import math
import zlib
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, NamedTuple, Optional

from .graph_store import IN, OUT, DynamicGraph, StreamEdge
from .query_model import WILDCARD, QueryGraph

log = logging.getLogger(__name__)

EDGE = "edge"
PATH2 = "path2"
SEP = ":"


class UndefinedSelectivity(ArithmeticError):
    """Raised when a ratio of selectivities has a zero denominator."""


@dataclass(frozen=True)
class MapConfig:
    """What goes into an edge's mapped type.

    ``buckets`` maps an attribute name to a ``{raw value: class}`` dict; values
    without an entry pass through unchanged.  In ``hash`` mode the composed
    symbol is replaced by a CRC32 hex digest.
    """
    attributes: tuple = ()
    buckets: dict = field(default_factory=dict, hash=False)
    vertex_labels: bool = False
    mode: str = "identity"

    def __post_init__(self):
        if self.mode not in ("identity", "hash"):
            raise ValueError(f"unknown map mode {self.mode!r}")

    @property
    def label_only(self) -> bool:
        return not self.attributes and not self.vertex_labels and self.mode == "identity"


LABEL_ONLY = MapConfig()


def _compose(parts: list, cfg: MapConfig) -> str:
    symbol = SEP.join(parts)
    if cfg.mode == "hash":
        if WILDCARD in parts:
            raise ValueError("wildcard patterns cannot be hashed")
        return format(zlib.crc32(symbol.encode("utf-8")), "08x")
    return symbol


def map_edge(e, cfg: MapConfig = LABEL_ONLY) -> str:
    """Mapped type of a data edge (EdgeRecord or StreamEdge)."""
    if cfg.label_only:
        return e.label
    parts = [e.label]
    for attr in cfg.attributes:
        value = e.attributes.get(attr)
        if value is None:
            parts.append("-")
        else:
            parts.append(cfg.buckets.get(attr, {}).get(value, value))
    if cfg.vertex_labels:
        parts.append(e.src_label)
        parts.append(e.dst_label)
    return _compose(parts, cfg)


def map_query_edge(query: QueryGraph, qi: int, cfg: MapConfig = LABEL_ONLY) -> str:
    """Mapped type pattern of a query edge; unconstrained parts become ``*``."""
    qe = query.edges[qi]
    label = qe.label if qe.label is not None else WILDCARD
    if cfg.label_only:
        return label
    attrs = dict(qe.attributes)
    parts = [label]
    for attr in cfg.attributes:
        value = attrs.get(attr)
        parts.append(WILDCARD if value is None
                     else cfg.buckets.get(attr, {}).get(value, value))
    if cfg.vertex_labels:
        for qv in (qe.src, qe.dst):
            parts.append(query.vertex_labels[qv] or WILDCARD)
    return _compose(parts, cfg)


def type_matches(pattern: str, concrete: str) -> bool:
    if pattern == concrete:
        return True
    if WILDCARD not in pattern:
        return False
    want = pattern.split(SEP)
    have = concrete.split(SEP)
    if len(want) != len(have):
        return False
    return all(w == WILDCARD or w == h for w, h in zip(want, have))


class PrimitiveKey(NamedTuple):
    kind: str
    arms: tuple  # ((type, orientation), ...); orientation "" for single edges

    @classmethod
    def edge(cls, etype: str) -> "PrimitiveKey":
        return cls(EDGE, ((etype, ""),))

    @classmethod
    def path(cls, arm1: tuple, arm2: tuple) -> "PrimitiveKey":
        if arm2 < arm1:
            arm1, arm2 = arm2, arm1
        return cls(PATH2, (arm1, arm2))

    @property
    def has_wildcard(self) -> bool:
        return any(WILDCARD in t for t, _ in self.arms)

    def accepts(self, other: "PrimitiveKey") -> bool:
        """Does this (possibly wildcarded) key cover the concrete key ``other``?"""
        if self.kind != other.kind:
            return False
        if self.kind == EDGE:
            return type_matches(self.arms[0][0], other.arms[0][0])
        (a, ao), (b, bo) = self.arms
        (c, co), (d, do) = other.arms
        return ((ao == co and bo == do and type_matches(a, c) and type_matches(b, d))
                or (ao == do and bo == co and type_matches(a, d) and type_matches(b, c)))

    def __str__(self):
        if self.kind == EDGE:
            return self.arms[0][0]
        return "+".join(f"{t}@{o}" for t, o in self.arms)

    @classmethod
    def parse(cls, kind: str, text: str) -> "PrimitiveKey":
        if kind == EDGE:
            return cls.edge(text)
        if kind != PATH2:
            raise ValueError(f"unknown primitive kind {kind!r}")
        arms = []
        for part in text.split("+"):
            t, _, o = part.rpartition("@")
            if o not in (IN, OUT):
                raise ValueError(f"bad path arm {part!r}")
            arms.append((t, o))
        if len(arms) != 2:
            raise ValueError(f"path key needs two arms: {text!r}")
        return cls.path(*arms)


@dataclass
class SelectivityTable:
    counts: dict = field(default_factory=dict)  # PrimitiveKey -> count
    edges_sampled: int = 0
    vertices_sampled: int = 0
    snapshot: Optional[int] = None

    def total(self, kind: str) -> int:
        return sum(c for k, c in self.counts.items() if k.kind == kind)

    def keys(self, kind: Optional[str] = None) -> list:
        return [k for k in self.counts if kind is None or k.kind == kind]

    def count(self, key: PrimitiveKey) -> int:
        if not key.has_wildcard:
            return self.counts.get(key, 0)
        return sum(c for k, c in self.counts.items() if key.accepts(k))

    def merged(self, other: "SelectivityTable") -> "SelectivityTable":
        counts = dict(self.counts)
        for k, c in other.counts.items():
            counts[k] = counts.get(k, 0) + c
        return SelectivityTable(counts,
                                max(self.edges_sampled, other.edges_sampled),
                                max(self.vertices_sampled, other.vertices_sampled),
                                self.snapshot if self.snapshot is not None else other.snapshot)

    def distribution(self, kind: str) -> list:
        """(key, count, selectivity) rows in ascending count order."""
        total = self.total(kind)
        rows = sorted(((k, c) for k, c in self.counts.items() if k.kind == kind),
                      key=lambda kc: (kc[1], kc[0]))
        return [(k, c, c / total) for k, c in rows]

    @property
    def mean_degree(self) -> float:
        if not self.vertices_sampled:
            return 0.0
        return 2.0 * self.edges_sampled / self.vertices_sampled


def count_edge_types(edges: Iterable, cfg: MapConfig = LABEL_ONLY) -> SelectivityTable:
    """Histogram of mapped edge types over a stream prefix."""
    hist: Counter = Counter()
    n = 0
    last = None
    vertices = set()
    for e in edges:
        hist[map_edge(e, cfg)] += 1
        n += 1
        last = e.timestamp
        vertices.add(e.src)
        vertices.add(e.dst)
    counts = {PrimitiveKey.edge(t): c for t, c in hist.items()}
    return SelectivityTable(counts, n, len(vertices), last)


def count_2edge_paths(graph: DynamicGraph, cfg: MapConfig = LABEL_ONLY) -> SelectivityTable:
    """Count every pair of distinct live edges that share a vertex.

    Per vertex, incident edges are bucketed by (mapped type, orientation);
    pairs inside a bucket contribute n(n-1)/2 and pairs across buckets n1*n2,
    visiting bucket pairs in lexical order so each pair is counted once.
    A self-loop lands in both its ``in`` and ``out`` bucket, and the one
    pairing of the loop with itself is subtracted.
    """
    paths: Counter = Counter()
    label_only = cfg.label_only
    for v in graph.vertices:
        local: Counter = Counter()
        loops: Counter = Counter()
        for orient, adj in ((OUT, graph.out_labels(v)), (IN, graph.in_labels(v))):
            for label, bucket in adj.items():
                if label_only:
                    local[(label, orient)] += len(bucket)
                    if orient == OUT:
                        for e in bucket.values():
                            if e.dst == v:
                                loops[label] += 1
                else:
                    for e in bucket.values():
                        t = map_edge(e, cfg)
                        local[(t, orient)] += 1
                        if orient == OUT and e.dst == v:
                            loops[t] += 1
        arms = sorted(local)
        for i, a in enumerate(arms):
            n1 = local[a]
            same = n1 * (n1 - 1) // 2
            if same:
                paths[(a, a)] += same
            for b in arms[i + 1:]:
                paths[(a, b)] += n1 * local[b]
        for t, n in loops.items():
            paths[((t, IN), (t, OUT))] -= n
    counts = {PrimitiveKey(PATH2, k): c for k, c in paths.items() if c > 0}
    return SelectivityTable(counts, graph.edge_count, len(graph.vertices), graph.t_last)


def estimate_table(prefix: Iterable[StreamEdge], cfg: MapConfig = LABEL_ONLY
                   ) -> SelectivityTable:
    """Both primitive kinds over a stream prefix loaded without a window."""
    graph = DynamicGraph()
    for item in prefix:
        graph.add(item)
    edges = count_edge_types(graph.edges.values(), cfg)
    return edges.merged(count_2edge_paths(graph, cfg))


def warmup_length(stream_length: int, fraction: float = 0.1,
                  cap: int = 1_000_000) -> int:
    return max(1, min(int(stream_length * fraction), cap)) if stream_length else 0


def selectivity(table: SelectivityTable, key: PrimitiveKey) -> float:
    total = table.total(key.kind)
    if total <= 0:
        raise ValueError(f"no {key.kind} primitives in the table")
    return table.count(key) / total


# -- query-side keys and tree metrics --------------------------------------

def query_primitive_key(query: QueryGraph, edge_ids, cfg: MapConfig = LABEL_ONLY
                        ) -> PrimitiveKey:
    """Primitive key of a 1-edge or 2-edge-path query fragment."""
    edge_ids = sorted(edge_ids)
    if len(edge_ids) == 1:
        return PrimitiveKey.edge(map_query_edge(query, edge_ids[0], cfg))
    if len(edge_ids) != 2:
        raise ValueError(f"{len(edge_ids)}-edge fragment is not a primitive")
    a, b = (query.edges[i] for i in edge_ids)
    shared = {a.src, a.dst} & {b.src, b.dst}
    if not shared:
        raise ValueError("the two edges do not share a vertex")
    center = min(shared)
    arms = []
    for qe in (a, b):
        arms.append((map_query_edge(query, qe.id, cfg),
                     OUT if qe.src == center else IN))
    return PrimitiveKey.path(*arms)


def expected_selectivity(tree, table: SelectivityTable, cfg: MapConfig = LABEL_ONLY) -> float:
    """Product of leaf selectivities."""
    value = 1.0
    for edges in tree.leaf_edge_sets():
        value *= selectivity(table, query_primitive_key(tree.query, edges, cfg))
    return value


def relative_selectivity(tree_k, tree_1, table: SelectivityTable,
                         cfg: MapConfig = LABEL_ONLY) -> float:
    if any(len(es) != 1 for es in tree_1.leaf_edge_sets()):
        raise ValueError("reference tree must be a 1-edge decomposition")
    denom = expected_selectivity(tree_1, table, cfg)
    if denom == 0:
        raise UndefinedSelectivity("1-edge decomposition has zero expected selectivity")
    return expected_selectivity(tree_k, table, cfg) / denom


# -- snapshot comparison ------------------------------------------------------

@dataclass
class SnapshotDiff:
    discordant: int
    pairs: int
    common_keys: int
    comparable: bool

    @property
    def distance(self) -> float:
        """Discordant pairs as a fraction of all key pairs (0 when incomparable)."""
        return self.discordant / self.pairs if self.pairs else 0.0


def selectivity_snapshot_diff(a: SelectivityTable, b: SelectivityTable,
                              kind: str = PATH2) -> SnapshotDiff:
    """Kendall-tau distance between the frequency rankings of shared keys.

    Pairs tied in either snapshot are not counted as discordant.
    """
    common = sorted(set(a.keys(kind)) & set(b.keys(kind)))
    pairs = discordant = 0
    for x, y in combinations(common, 2):
        pairs += 1
        da = a.counts[x] - a.counts[y]
        db = b.counts[x] - b.counts[y]
        if da * db < 0:
            discordant += 1
    return SnapshotDiff(discordant, pairs, len(common), len(common) >= 2)


def top_share(table: SelectivityTable, kind: str = PATH2, fraction: float = 0.1) -> float:
    """Share of total mass held by the top ``fraction`` of keys by count."""
    counts = sorted((c for k, c in table.counts.items() if k.kind == kind), reverse=True)
    if not counts:
        return 0.0
    top = max(1, math.ceil(len(counts) * fraction))
    return sum(counts[:top]) / sum(counts)


# -- stats CSV ----------------------------------------------------------------

STATS_HEADER = ["kind", "key", "count", "selectivity"]


def write_stats(path, table: SelectivityTable) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# edges={table.edges_sampled} vertices={table.vertices_sampled} "
                 f"snapshot={'-' if table.snapshot is None else table.snapshot}\n")
        writer = csv.writer(fh)
        writer.writerow(STATS_HEADER)
        rows = []
        for kind in (EDGE, PATH2):
            rows.extend((kind, k, c, s) for k, c, s in table.distribution(kind))
        rows.sort(key=lambda r: (r[2], r[0], r[1]))
        for kind, k, c, s in rows:
            writer.writerow([kind, str(k), c, f"{s:.12g}"])


def read_stats(path) -> SelectivityTable:
    table = SelectivityTable()
    with open(path, encoding="utf-8", newline="") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                for part in line[1:].split():
                    name, _, value = part.partition("=")
                    if name == "edges":
                        table.edges_sampled = int(value)
                    elif name == "vertices":
                        table.vertices_sampled = int(value)
                    elif name == "snapshot" and value != "-":
                        table.snapshot = int(value)
                continue
            lines.append(line)
    reader = csv.DictReader(lines)
    if reader.fieldnames != STATS_HEADER:
        raise ValueError(f"stats file header must be {','.join(STATS_HEADER)}")
    for row in reader:
        key = PrimitiveKey.parse(row["kind"], row["key"])
        table.counts[key] = table.counts.get(key, 0) + int(row["count"])
    return table
