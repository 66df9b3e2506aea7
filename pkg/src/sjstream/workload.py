"""Synthetic labeled edge streams and random path/tree query sets."""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, fields
from typing import Iterator, Optional

from .graph_store import INFINITE_WINDOW, StreamEdge
from .query_model import QueryError, QueryGraph
from .selectivity import (
    LABEL_ONLY, MapConfig, SelectivityTable, expected_selectivity,
    query_primitive_key,
)
from .decomposer import path_tree, query_fragments

log = logging.getLogger(__name__)

# netflow protocol alphabet, most frequent first
PROTOCOLS = ("tcp", "udp", "icmp", "ipv6", "ah", "esp", "gre")


@dataclass
class StreamSpec:
    vertices: int = 1000
    edges: int = 10000
    labels: tuple = PROTOCOLS
    exponent: Optional[float] = 2.0
    weights: Optional[tuple] = None
    stride: int = 1
    attachment: str = "preferential"
    uniform_mix: float = 0.5
    vertex_labels: tuple = ("ip",)
    self_loops: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.vertices < 1 or self.edges < 0:
            raise ValueError("need at least one vertex and a non-negative edge count")
        if self.vertices < 2 and not self.self_loops:
            raise ValueError("a single vertex cannot carry edges without self-loops")
        if not self.labels:
            raise ValueError("empty label alphabet")
        if self.weights is not None and len(self.weights) != len(self.labels):
            raise ValueError("weights and labels differ in length")
        if self.attachment not in ("uniform", "preferential"):
            raise ValueError(f"unknown attachment model {self.attachment!r}")
        if self.stride < 0:
            raise ValueError("negative timestamp stride")

    def label_weights(self) -> list:
        if self.weights is not None:
            return [float(w) for w in self.weights]
        if self.exponent is None:
            return [1.0] * len(self.labels)
        return [rank ** -self.exponent for rank in range(1, len(self.labels) + 1)]


def _coerce(name: str, value: str, default):
    if name in ("labels", "vertex_labels"):
        return tuple(v.strip() for v in value.split(",") if v.strip())
    if name == "weights":
        if value.lower() in ("none", ""):
            return None
        return tuple(float(v) for v in value.split(","))
    if name == "exponent":
        return None if value.lower() in ("none", "uniform", "") else float(value)
    if name == "self_loops":
        return value.lower() in ("1", "true", "yes")
    if isinstance(default, float):
        return float(value)
    if isinstance(default, int):
        return int(value)
    return value


def parse_stream_spec(text: str) -> StreamSpec:
    """Read ``key=value`` lines; unknown keys are an error."""
    known = {f.name: f for f in fields(StreamSpec)}
    defaults = StreamSpec()
    kwargs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or key not in known:
            raise ValueError(f"line {lineno}: unknown spec key {key!r}")
        kwargs[key] = _coerce(key, value.strip(), getattr(defaults, key))
    return StreamSpec(**kwargs)


def format_stream_spec(spec: StreamSpec) -> str:
    lines = []
    for f in fields(StreamSpec):
        value = getattr(spec, f.name)
        if isinstance(value, tuple):
            value = ",".join(map(str, value))
        lines.append(f"{f.name}={value}")
    return "\n".join(lines) + "\n"


def iter_stream(spec: StreamSpec) -> Iterator[StreamEdge]:
    rng = random.Random(spec.seed)
    labels = list(spec.labels)
    cum = []
    acc = 0.0
    for w in spec.label_weights():
        acc += w
        cum.append(acc)
    vlabels = list(spec.vertex_labels)
    vertex_label = [vlabels[rng.randrange(len(vlabels))] if len(vlabels) > 1 else vlabels[0]
                    for _ in range(spec.vertices)]
    names = [f"v{i}" for i in range(spec.vertices)]
    endpoints: list = []
    preferential = spec.attachment == "preferential"
    n = spec.vertices

    def pick():
        if preferential and endpoints and rng.random() >= spec.uniform_mix:
            return endpoints[rng.randrange(len(endpoints))]
        return rng.randrange(n)

    for i in range(spec.edges):
        s = pick()
        d = pick()
        while d == s and not spec.self_loops:
            d = rng.randrange(n)
        if preferential:
            endpoints.append(s)
            endpoints.append(d)
        label = rng.choices(labels, cum_weights=cum)[0]
        yield StreamEdge(i * spec.stride, names[s], vertex_label[s], label,
                         names[d], vertex_label[d], {})


def generate_stream(spec: StreamSpec) -> list:
    return list(iter_stream(spec))


# -- queries --------------------------------------------------------------------

PATH = "path"
BINARY_TREE = "binary-tree"
NARY_TREE = "n-ary-tree"


@dataclass
class QuerySpec:
    shape: str = PATH
    size: int = 3
    labels: tuple = PROTOCOLS
    triples: tuple = ()  # (src vertex label, edge label, dst vertex label)
    window: float = INFINITE_WINDOW
    seed: int = 0

    def __post_init__(self):
        if self.shape not in (PATH, BINARY_TREE, NARY_TREE):
            raise ValueError(f"unknown query shape {self.shape!r}")
        if self.size < 1:
            raise ValueError("query size must be at least one edge")
        if not self.labels and not self.triples:
            raise ValueError("need edge labels or schema triples")

    @property
    def group(self) -> str:
        return f"{self.shape}-{self.size}"


def random_query(spec: QuerySpec, rng: random.Random) -> QueryGraph:
    labels = list(spec.labels)
    if spec.shape == PATH:
        triples = [(i, rng.choice(labels), i + 1) for i in range(spec.size)]
        return QueryGraph.from_edges(triples, window=spec.window, group=spec.group)
    if spec.shape == BINARY_TREE:
        children = {0: 0}
        triples = []
        for child in range(1, spec.size + 1):
            parent = rng.choice(sorted(v for v, c in children.items() if c < 2))
            children[parent] += 1
            children[child] = 0
            triples.append((parent, rng.choice(labels), child))
        return QueryGraph.from_edges(triples, window=spec.window, group=spec.group)
    if not spec.triples:
        triples = []
        for child in range(1, spec.size + 1):
            triples.append((rng.randrange(child), rng.choice(labels), child))
        return QueryGraph.from_edges(triples, window=spec.window, group=spec.group)
    schema = list(spec.triples)
    first = rng.choice(schema)
    vlabel = {0: first[0], 1: first[2]}
    triples = [(0, first[1], 1)]
    tries = 0
    while len(triples) < spec.size:
        tries += 1
        if tries > 1000 * spec.size:
            raise QueryError("schema cannot grow a tree of the requested size")
        x = rng.choice(sorted(vlabel))
        options = [(t, True) for t in schema if t[0] == vlabel[x]]
        options += [(t, False) for t in schema if t[2] == vlabel[x]]
        if not options:
            continue
        (sl, el, dl), outward = rng.choice(options)
        new = len(vlabel)
        if outward:
            vlabel[new] = dl
            triples.append((x, el, new))
        else:
            vlabel[new] = sl
            triples.append((new, el, x))
    return QueryGraph.from_edges(triples, vertex_labels=vlabel,
                                 window=spec.window, group=spec.group)


def has_unseen_path(query: QueryGraph, table: SelectivityTable,
                    cfg: MapConfig = LABEL_ONLY) -> bool:
    """True if some edge or 2-edge path of the query never occurred in the table."""
    for size in (1, 2):
        for frag in query_fragments(query, range(len(query.edges)), size):
            if table.count(query_primitive_key(query, frag, cfg)) == 0:
                return True
    return False


def selectivity_bin(value: float) -> Optional[int]:
    """Decade bin of a selectivity value (None for zero)."""
    if value <= 0:
        return None
    return math.floor(math.log10(value))


def sample_by_bins(items: list, bin_of, n: int, rng: random.Random) -> list:
    """Round-robin over bins so each bin contributes as evenly as supply allows."""
    bins: dict = {}
    for item in items:
        bins.setdefault(bin_of(item), []).append(item)
    for members in bins.values():
        rng.shuffle(members)
    order = sorted(bins, key=lambda b: (b is None, b if b is not None else 0))
    picked = []
    while len(picked) < n and any(bins[b] for b in order):
        for b in order:
            if bins[b] and len(picked) < n:
                picked.append(bins[b].pop())
    return picked


def generate_queries(spec: QuerySpec, table: SelectivityTable, n: int,
                     cfg: MapConfig = LABEL_ONLY, pool: int = 100) -> list:
    """Random queries with no unseen primitives, spread across selectivity decades."""
    rng = random.Random(spec.seed)
    seen = set()
    candidates = []
    attempts = 0
    target = max(pool, n)
    while len(seen) < target and attempts < 20 * target:
        attempts += 1
        q = random_query(spec, rng)
        sig = q.shape_signature()
        if sig in seen:
            continue
        seen.add(sig)
        candidates.append(q)
    valid = [q for q in candidates if not has_unseen_path(q, table, cfg)]
    scored = [(q, expected_selectivity(path_tree(q, table, cfg), table, cfg)) for q in valid]
    picked = sample_by_bins(scored, lambda qs: selectivity_bin(qs[1]), n, rng)
    if len(picked) < n:
        log.warning("only %d of %d requested queries survived filtering", len(picked), n)
    return [q for q, _ in picked]
