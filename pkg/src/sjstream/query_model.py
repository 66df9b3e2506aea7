"""Query graphs, matches, and the join/projection operators over matches."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .graph_store import (
    EdgeRecord, INFINITE_WINDOW, format_attributes, parse_attributes,
    parse_window,
)

WILDCARD = "*"


class QueryError(ValueError):
    pass


@dataclass(frozen=True)
class QueryEdge:
    id: int
    src: int
    dst: int
    label: Optional[str]  # None is a wildcard
    attributes: tuple = ()  # sorted (key, value) equality constraints

    def accepts(self, edge: EdgeRecord) -> bool:
        if self.label is not None and edge.label != self.label:
            return False
        for key, value in self.attributes:
            if edge.attributes.get(key) != value:
                return False
        return True


@dataclass
class QueryGraph:
    vertex_names: list[str]
    vertex_labels: list[Optional[str]]
    edges: list[QueryEdge]
    window: float = INFINITE_WINDOW
    group: Optional[str] = None

    def __post_init__(self):
        if not self.edges:
            raise QueryError("query has no edges")
        for i, qe in enumerate(self.edges):
            if qe.id != i:
                raise QueryError("query edge ids must be dense 0..|E|-1")
            if qe.src == qe.dst:
                raise QueryError(f"query edge {i} is a self-loop")
        if not self.is_connected(range(len(self.edges))):
            raise QueryError("query graph is not connected")

    @classmethod
    def from_edges(cls, triples: Iterable[tuple], vertex_labels: Optional[dict] = None,
                   window: float = INFINITE_WINDOW, group: Optional[str] = None
                   ) -> "QueryGraph":
        """Build from ``(src_name, label, dst_name)`` triples.

        Labels may be ``"*"``/None for wildcards; a fourth element, if present,
        is a dict of attribute equality constraints.
        """
        vertex_labels = {str(k): v for k, v in (vertex_labels or {}).items()}
        names: list[str] = []
        index: dict[str, int] = {}

        def vid(name):
            name = str(name)
            if name not in index:
                index[name] = len(names)
                names.append(name)
            return index[name]

        edges = []
        for i, t in enumerate(triples):
            src, label, dst = t[0], t[1], t[2]
            attrs = t[3] if len(t) > 3 else {}
            label = None if label in (None, WILDCARD) else label
            edges.append(QueryEdge(i, vid(src), vid(dst), label,
                                   tuple(sorted(attrs.items()))))
        labels = []
        for n in names:
            lab = vertex_labels.get(n)
            labels.append(None if lab in (None, WILDCARD) else lab)
        return cls(names, labels, edges, window, group)

    @property
    def num_vertices(self) -> int:
        return len(self.vertex_names)

    def edge_vertices(self, edge_ids: Iterable[int]) -> frozenset:
        vs = set()
        for i in edge_ids:
            qe = self.edges[i]
            vs.add(qe.src)
            vs.add(qe.dst)
        return frozenset(vs)

    def is_connected(self, edge_ids: Iterable[int]) -> bool:
        edge_ids = list(edge_ids)
        if not edge_ids:
            return True
        adj: dict[int, set[int]] = {}
        for i in edge_ids:
            qe = self.edges[i]
            adj.setdefault(qe.src, set()).add(qe.dst)
            adj.setdefault(qe.dst, set()).add(qe.src)
        start = next(iter(adj))
        seen = {start}
        stack = [start]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(adj)

    def vertex_accepts(self, qv: int, label: str) -> bool:
        want = self.vertex_labels[qv]
        return want is None or want == label

    def accepts(self, qe: QueryEdge, edge: EdgeRecord) -> bool:
        """Label, attribute and endpoint-label check for one edge binding."""
        return (qe.accepts(edge)
                and self.vertex_accepts(qe.src, edge.src_label)
                and self.vertex_accepts(qe.dst, edge.dst_label))

    def shape_signature(self) -> tuple:
        return (tuple(self.vertex_labels),
                tuple((e.src, e.dst, e.label, e.attributes) for e in self.edges))


@dataclass(frozen=True)
class CutSubgraph:
    vertices: tuple  # query-vertex ids, ascending
    edges: tuple = ()

    @classmethod
    def between(cls, query: QueryGraph, left_edges, right_edges) -> "CutSubgraph":
        shared_v = query.edge_vertices(left_edges) & query.edge_vertices(right_edges)
        shared_e = set(left_edges) & set(right_edges)
        return cls(tuple(sorted(shared_v)), tuple(sorted(shared_e)))

    def __bool__(self):
        return bool(self.vertices)


class Match:
    """A set of (query edge, data edge) pairs plus the vertex map they induce."""

    __slots__ = ("pairs", "vmap", "earliest", "latest", "_sig")

    def __init__(self, pairs: dict, vmap: dict, earliest: int, latest: int):
        self.pairs = pairs
        self.vmap = vmap
        self.earliest = earliest
        self.latest = latest
        self._sig = None

    @classmethod
    def from_edges(cls, query: QueryGraph, bindings: dict) -> "Match":
        """Build from ``{query_edge_id: EdgeRecord}``; no validity checks."""
        pairs = {}
        vmap = {}
        times = []
        for qi, e in bindings.items():
            qe = query.edges[qi]
            pairs[qi] = e.id
            vmap[qe.src] = e.src
            vmap[qe.dst] = e.dst
            times.append(e.timestamp)
        return cls(pairs, vmap, min(times), max(times))

    @property
    def signature(self) -> tuple:
        sig = self._sig
        if sig is None:
            sig = self._sig = tuple(sorted(self.pairs.items()))
        return sig

    def data_edges(self) -> set:
        return set(self.pairs.values())

    def __len__(self):
        return len(self.pairs)

    def __eq__(self, other):
        return isinstance(other, Match) and self.signature == other.signature

    def __hash__(self):
        return hash(self.signature)

    def __repr__(self):
        body = ",".join(f"{q}={d}" for q, d in self.signature)
        return f"Match({body} t=[{self.earliest},{self.latest}])"


def join_matches(m1: Match, m2: Match, cut: CutSubgraph) -> Optional[Match]:
    """Union of two matches, or None if they disagree or collide."""
    v1 = m1.vmap
    v2 = m2.vmap
    for qv in cut.vertices:
        if v1[qv] != v2[qv]:
            return None
    vmap = dict(v1)
    used = set(v1.values())
    for qv, dv in v2.items():
        cur = vmap.get(qv)
        if cur is None:
            if dv in used:
                return None
            vmap[qv] = dv
            used.add(dv)
        elif cur != dv:
            return None
    pairs = dict(m1.pairs)
    taken = set(pairs.values())
    for qe, de in m2.pairs.items():
        cur = pairs.get(qe)
        if cur is None:
            if de in taken:
                return None
            pairs[qe] = de
            taken.add(de)
        elif cur != de:
            return None
    return Match(pairs, vmap,
                 min(m1.earliest, m2.earliest), max(m1.latest, m2.latest))


def project(m: Match, cut: CutSubgraph) -> tuple:
    """Join key: data-vertex images of the cut vertices in ascending order."""
    try:
        return tuple(m.vmap[qv] for qv in cut.vertices)
    except KeyError as exc:
        raise ValueError(f"cut vertex {exc.args[0]} is not mapped by {m!r}") from None


def match_span(m: Match) -> int:
    if not m.pairs:
        raise ValueError("span of an empty match is undefined")
    return m.latest - m.earliest


def canonical_signature(m: Match) -> tuple:
    return m.signature


# -- query file format ------------------------------------------------------

def parse_query(lines: Iterable[str]) -> QueryGraph:
    window = INFINITE_WINDOW
    group = None
    triples = []
    vlabels: dict[str, Optional[str]] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        if line.startswith("@"):
            directive, _, value = line[1:].partition(" ")
            directive = directive.strip().lower()
            if directive == "window":
                window = parse_window(value)
            elif directive == "group":
                group = value.strip()
            else:
                raise QueryError(f"line {lineno}: unknown directive @{directive}")
            continue
        cols = line.split("\t")
        if len(cols) not in (6, 7):
            raise QueryError(f"line {lineno}: expected 6 or 7 columns, got {len(cols)}")
        _, src, src_label, label, dst, dst_label = cols[:6]
        attrs = parse_attributes(cols[6]) if len(cols) == 7 else {}
        for name, lab in ((src, src_label), (dst, dst_label)):
            lab = None if lab == WILDCARD else lab
            if name in vlabels and vlabels[name] != lab:
                raise QueryError(f"line {lineno}: conflicting labels for vertex {name!r}")
            vlabels[name] = lab
        triples.append((src, label, dst, attrs))
    return QueryGraph.from_edges(triples, vlabels, window, group)


def load_query(path) -> QueryGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_query(fh)


def format_query(query: QueryGraph) -> str:
    out = []
    if query.group:
        out.append(f"@group {query.group}")
    w = query.window
    out.append(f"@window {'inf' if w == INFINITE_WINDOW else w}")
    for qe in query.edges:
        cols = ["0",
                query.vertex_names[qe.src], query.vertex_labels[qe.src] or WILDCARD,
                qe.label or WILDCARD,
                query.vertex_names[qe.dst], query.vertex_labels[qe.dst] or WILDCARD]
        if qe.attributes:
            cols.append(format_attributes(dict(qe.attributes)))
        out.append("\t".join(cols))
    return "\n".join(out) + "\n"


def write_query(path, query: QueryGraph) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_query(query))
