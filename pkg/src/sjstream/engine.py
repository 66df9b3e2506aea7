"""Continuous query execution over a windowed graph stream.

Eager mode searches every leaf primitive around every new edge.  Lazy mode
searches leaf 0 everywhere and leaf i > 0 only around vertices enabled by a
partial match of leaves 0..i-1; enabling a vertex also searches the existing
window around it, so leaf matches that arrived first are not lost.

Enable bits are widened along edges that could belong to the gated leaf: a
vertex enabled for a 2-edge leaf passes one hop of slack to its neighbours,
so a leaf match whose last edge does not touch the enabled vertex itself is
still searched when that edge arrives.
"""

from __future__ import annotations

import logging
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .decomposer import Strategy
from .graph_store import IN, OUT, DynamicGraph, EdgeRecord, StreamEdge
from .query_model import Match, QueryGraph
from .sjtree import (
    SJTree, prune_expired, space_estimate, table_sizes, update_sjtree,
)

log = logging.getLogger(__name__)

DEFAULT_SWEEP = 4096
DEFAULT_BUDGET = 100_000


class PrimitiveMatcher:
    """Finds the embeddings of a small (1-3 edge) query subgraph near an edge or vertex."""

    def __init__(self, query: QueryGraph, edge_ids):
        edge_ids = tuple(sorted(edge_ids))
        if not 1 <= len(edge_ids) <= 3:
            raise ValueError(f"primitive matcher supports 1-3 edges, got {len(edge_ids)}")
        if not query.is_connected(edge_ids):
            raise ValueError("primitive subgraph must be connected")
        self.query = query
        self.edge_ids = edge_ids
        self.qedges = [query.edges[i] for i in edge_ids]
        self.vertices = sorted(query.edge_vertices(edge_ids))
        self.depth = len(edge_ids) - 1
        labels = {qe.label for qe in self.qedges}
        self.labels = None if None in labels else frozenset(labels)
        self.edge_plans = [(qe, self._plan({qe.src, qe.dst}, exclude=qe.id))
                           for qe in self.qedges]
        self.vertex_plans = [(qv, self._plan({qv})) for qv in self.vertices]

    def _plan(self, mapped: set, exclude: Optional[int] = None) -> list:
        mapped = set(mapped)
        rest = [qe for qe in self.qedges if qe.id != exclude]
        plan = []
        while rest:
            for qe in rest:
                if qe.src in mapped or qe.dst in mapped:
                    break
            plan.append(qe)
            rest.remove(qe)
            mapped.update((qe.src, qe.dst))
        return plan

    def could_bind(self, e: EdgeRecord) -> bool:
        if self.labels is not None and e.label not in self.labels:
            return False
        accepts = self.query.accepts
        return any(accepts(qe, e) for qe in self.qedges)

    def around_edge(self, graph: DynamicGraph, e: EdgeRecord) -> list:
        """All embeddings that use data edge ``e``."""
        if self.labels is not None and e.label not in self.labels:
            return []
        if e.src == e.dst:
            return []
        found: dict = {}
        accepts = self.query.accepts
        for qe, plan in self.edge_plans:
            if not accepts(qe, e):
                continue
            self._extend(graph, plan, 0, {qe.src: e.src, qe.dst: e.dst},
                         {qe.id: e}, found)
        return list(found.values())

    def around_vertex(self, graph: DynamicGraph, x: int) -> list:
        """All embeddings whose vertex set contains data vertex ``x``."""
        if not graph.has_vertex(x):
            return []
        label = graph.vertex_label(x)
        found: dict = {}
        for qv, plan in self.vertex_plans:
            if self.query.vertex_accepts(qv, label):
                self._extend(graph, plan, 0, {qv: x}, {}, found)
        return list(found.values())

    def _extend(self, graph, plan, idx, vmap, bound, found) -> None:
        if idx == len(plan):
            pairs = {}
            lo = hi = None
            for qi, de in bound.items():
                pairs[qi] = de.id
                ts = de.timestamp
                if lo is None or ts < lo:
                    lo = ts
                if hi is None or ts > hi:
                    hi = ts
            m = Match(pairs, dict(vmap), lo, hi)
            found.setdefault(m.signature, m)
            return
        qe = plan[idx]
        s = vmap.get(qe.src)
        d = vmap.get(qe.dst)
        if s is not None:
            cands = graph.iter_adjacent(s, OUT, qe.label)
            free, fixed = qe.dst, d
        else:
            cands = graph.iter_adjacent(d, IN, qe.label)
            free, fixed = qe.src, None
        used = set(vmap.values())
        taken = {b.id for b in bound.values()}
        accepts = self.query.accepts
        for c in cands:
            if c.id in taken or not accepts(qe, c):
                continue
            other = c.dst if s is not None else c.src
            if fixed is not None:
                if other != fixed:
                    continue
                bound[qe.id] = c
                self._extend(graph, plan, idx + 1, vmap, bound, found)
                del bound[qe.id]
            else:
                if other in used:
                    continue
                vmap[free] = other
                bound[qe.id] = c
                self._extend(graph, plan, idx + 1, vmap, bound, found)
                del bound[qe.id]
                del vmap[free]


def subgraph_iso_around_edge(graph: DynamicGraph, query: QueryGraph, edge_ids,
                             e: Optional[EdgeRecord] = None,
                             anchor: Optional[int] = None) -> list:
    """Embeddings of a 1-3 edge query subgraph containing ``e`` (or ``anchor``)."""
    matcher = PrimitiveMatcher(query, edge_ids)
    if anchor is not None:
        return matcher.around_vertex(graph, anchor)
    return matcher.around_edge(graph, e)


@dataclass
class MatchEvent:
    match: Match
    timestamp: int
    edge_id: int
    query_id: Optional[str] = None

    def format(self) -> str:
        body = ",".join(f"{q}={d}" for q, d in self.match.signature)
        return f"{self.timestamp}\t{body}"


@dataclass
class EngineConfig:
    strategy: Strategy = field(default_factory=lambda: Strategy("path", "lazy"))
    window: Optional[float] = None
    dedupe: bool = True
    sweep_interval: int = DEFAULT_SWEEP
    backsearch: bool = True
    work_budget: int = DEFAULT_BUDGET
    trace: bool = False


@dataclass
class RunMetrics:
    edges: int = 0
    iso_calls: int = 0
    iso_time: float = 0.0
    update_time: float = 0.0
    backsearches: int = 0
    leaf_matches: int = 0
    matches_emitted: int = 0
    wall_time: float = 0.0
    peak_table_entries: int = 0
    table_sizes: dict = field(default_factory=dict)

    @property
    def edges_per_sec(self) -> float:
        return self.edges / self.wall_time if self.wall_time > 0 else 0.0

    @property
    def iso_fraction(self) -> float:
        return min(1.0, self.iso_time / self.wall_time) if self.wall_time > 0 else 0.0

    @property
    def update_fraction(self) -> float:
        return min(1.0, self.update_time / self.wall_time) if self.wall_time > 0 else 0.0

    def as_row(self) -> dict:
        return {
            "edges": self.edges, "iso_calls": self.iso_calls,
            "iso_time": f"{self.iso_time:.6f}", "update_time": f"{self.update_time:.6f}",
            "backsearches": self.backsearches, "leaf_matches": self.leaf_matches,
            "matches_emitted": self.matches_emitted,
            "wall_time": f"{self.wall_time:.6f}",
            "edges_per_sec": f"{self.edges_per_sec:.1f}",
            "iso_fraction": f"{self.iso_fraction:.4f}",
            "update_fraction": f"{self.update_fraction:.4f}",
            "peak_table_entries": self.peak_table_entries,
        }


_DELIVER = 0
_ENABLE = 1


class Engine:
    """One registered query over one stream: ingestion, search, join, emission."""

    def __init__(self, tree: SJTree, config: Optional[EngineConfig] = None,
                 sink: Optional[Callable[[MatchEvent], None]] = None,
                 query_id: Optional[str] = None):
        self.config = config or EngineConfig()
        self.tree = tree
        self.query = tree.query
        window = self.config.window
        if window is None:
            window = tree.window
        self.window = window
        tree.window = window
        self.graph = DynamicGraph(window)
        self.graph.vertex_removed_listeners.append(self._vertex_removed)
        self.sink = sink
        self.query_id = query_id
        self.lazy = self.config.strategy.lazy
        self.matchers = [PrimitiveMatcher(self.query, tree.leaf_node(i).edges)
                         for i in range(len(tree.leaves))]
        self.leaf_ids = list(tree.leaves)
        k = len(self.matchers)
        # stored node id -> ordinal of the leaf its matches enable
        self._enables = {tree.accumulated(j).id: j + 1 for j in range(k - 1)}
        self.bits: dict[int, dict[int, int]] = {}
        self.emitted: dict = {}
        self.metrics = RunMetrics()
        self.iso_log: list = []
        self._pending: deque = deque()
        self._now = 0
        self._edge: Optional[EdgeRecord] = None
        self._work = 0
        self._over_budget = False
        self._on_insert = self._queue_enable if self.lazy else None

    # -- ingestion ---------------------------------------------------------

    def process(self, item: StreamEdge) -> None:
        start = time.perf_counter()
        graph = self.graph
        e = graph.edges[graph.add(item)]
        self._edge = e
        self._now = e.timestamp
        self._work = 0
        self._over_budget = False
        m = self.metrics
        m.edges += 1
        if self.lazy:
            self._propagate_on_arrival(e)
        bits = self.bits
        for i, matcher in enumerate(self.matchers):
            if matcher.labels is not None and e.label not in matcher.labels:
                continue
            if self.lazy and i > 0:
                bu = bits.get(e.src)
                bv = bits.get(e.dst)
                if not ((bu and i in bu) or (bv and i in bv)):
                    continue
            if self.config.trace:
                self.iso_log.append((i, e.id, self._enabled(e.src, i), self._enabled(e.dst, i)))
            t0 = time.perf_counter()
            found = matcher.around_edge(graph, e)
            m.iso_time += time.perf_counter() - t0
            m.iso_calls += 1
            for lm in found:
                self._pending.append((_DELIVER, i, lm))
            self._drain()
        if self.config.sweep_interval and m.edges % self.config.sweep_interval == 0:
            self.sweep()
        m.wall_time += time.perf_counter() - start

    def run(self, items: Iterable[StreamEdge]) -> RunMetrics:
        for item in items:
            self.process(item)
        self.finish()
        return self.metrics

    def finish(self) -> None:
        sizes = table_sizes(self.tree)
        self.metrics.table_sizes = sizes
        self.metrics.peak_table_entries = max(self.metrics.peak_table_entries,
                                              sum(sizes.values()))

    def sweep(self) -> int:
        removed = prune_expired(self.tree, self._now)
        horizon = self._now - self.window
        stale = [sig for sig, earliest in self.emitted.items() if earliest < horizon]
        for sig in stale:
            del self.emitted[sig]
        total = sum(len(n) for n in self.tree.nodes)
        if total > self.metrics.peak_table_entries:
            self.metrics.peak_table_entries = total
        return removed

    # -- delivery and joining ------------------------------------------------

    def _drain(self) -> None:
        pending = self._pending
        m = self.metrics
        single_leaf = len(self.matchers) == 1
        while pending:
            kind, i, match = pending.popleft()
            if kind == _ENABLE:
                self._enable(i, match)
                continue
            if match.latest - match.earliest >= self.window:
                continue
            m.leaf_matches += 1
            if single_leaf:
                self._emit(match)
                continue
            t0 = time.perf_counter()
            update_sjtree(self.tree, self.leaf_ids[i], match, self._emit,
                          self._now, self._on_insert)
            m.update_time += time.perf_counter() - t0

    def _emit(self, match: Match) -> None:
        if match.latest - match.earliest >= self.window:
            return
        if self.config.dedupe:
            sig = match.signature
            if sig in self.emitted:
                return
            self.emitted[sig] = match.earliest
        self.metrics.matches_emitted += 1
        if self.sink is not None:
            self.sink(MatchEvent(match, self._now, self._edge.id, self.query_id))

    # -- lazy search -----------------------------------------------------------

    def _queue_enable(self, node, match: Match) -> None:
        nxt = self._enables.get(node.id)
        if nxt is not None:
            self._pending.append((_ENABLE, nxt, match))

    def _enabled(self, vid: int, leaf: int) -> bool:
        b = self.bits.get(vid)
        return bool(b) and leaf in b

    def _enable(self, leaf: int, partial: Match) -> None:
        """Turn on search for ``leaf`` at every vertex of ``partial``.

        Vertices newly enabled at full depth are back-searched, so leaf
        matches already present in the window get delivered too.
        """
        matcher = self.matchers[leaf]
        depth = matcher.depth
        graph = self.graph
        for x in set(partial.vmap.values()):
            if not graph.has_vertex(x):
                continue
            b = self.bits.setdefault(x, {})
            if b.get(leaf, -1) >= depth:
                continue
            b[leaf] = depth
            if depth:
                self._spread(x, leaf, depth)
            if not self.config.backsearch:
                continue
            t0 = time.perf_counter()
            found = matcher.around_vertex(graph, x)
            self.metrics.iso_time += time.perf_counter() - t0
            self.metrics.iso_calls += 1
            self.metrics.backsearches += 1
            self._work += len(found)
            if self._work > self.config.work_budget and not self._over_budget:
                self._over_budget = True
                log.warning("back-search work %d exceeds budget at edge %d",
                            self._work, self._edge.id)
            for lm in found:
                self._pending.append((_DELIVER, leaf, lm))

    def _spread(self, x: int, leaf: int, hops: int) -> None:
        """Give neighbours reachable over leaf-compatible edges ``hops - 1`` of slack."""
        matcher = self.matchers[leaf]
        frontier = [(x, hops)]
        graph = self.graph
        while frontier:
            v, h = frontier.pop()
            if h <= 0:
                continue
            for direction in (OUT, IN):
                for e in graph.iter_adjacent(v, direction):
                    if not matcher.could_bind(e):
                        continue
                    w = e.dst if direction == OUT else e.src
                    b = self.bits.setdefault(w, {})
                    if b.get(leaf, -1) < h - 1:
                        b[leaf] = h - 1
                        frontier.append((w, h - 1))

    def _propagate_on_arrival(self, e: EdgeRecord) -> None:
        bits = self.bits
        bu = bits.get(e.src)
        bv = bits.get(e.dst)
        if not bu and not bv:
            return
        for side, other, b in ((e.src, e.dst, bu), (e.dst, e.src, bv)):
            if not b:
                continue
            for leaf, h in list(b.items()):
                if h <= 0 or not self.matchers[leaf].could_bind(e):
                    continue
                ob = bits.setdefault(other, {})
                if ob.get(leaf, -1) < h - 1:
                    ob[leaf] = h - 1
                    if h - 1 > 0:
                        self._spread(other, leaf, h - 1)

    def _vertex_removed(self, vid: int) -> None:
        self.bits.pop(vid, None)

    # -- reporting ---------------------------------------------------------------

    def run_metrics(self) -> RunMetrics:
        self.finish()
        return self.metrics

    def space(self) -> int:
        return space_estimate(self.tree)


def dynamic_graph_search(tree: SJTree, edges: Iterable[StreamEdge],
                         sink: Callable[[MatchEvent], None],
                         window: Optional[float] = None, **kw) -> Engine:
    """Eager search: every leaf primitive is searched around every new edge."""
    eng = Engine(tree, EngineConfig(Strategy(_decomp(tree), "eager"), window, **kw), sink)
    eng.run(edges)
    return eng


def lazy_search(tree: SJTree, edges: Iterable[StreamEdge],
                sink: Callable[[MatchEvent], None],
                window: Optional[float] = None, **kw) -> Engine:
    """Lazy search: leaf i > 0 is searched only where the bitmap enables it."""
    eng = Engine(tree, EngineConfig(Strategy(_decomp(tree), "lazy"), window, **kw), sink)
    eng.run(edges)
    return eng


def _decomp(tree: SJTree) -> str:
    return "path" if any(len(es) > 1 for es in tree.leaf_edge_sets()) else "single"


def collect(tree: SJTree, edges: Iterable[StreamEdge], strategy: Strategy,
            window: Optional[float] = None, **kw) -> tuple:
    """Run a fresh engine and return (events, engine)."""
    events: list = []
    tree.clear()
    eng = Engine(tree, EngineConfig(strategy, window, **kw), events.append)
    eng.run(edges)
    return events, eng
