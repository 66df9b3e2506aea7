"""Non-incremental baseline: re-enumerate query embeddings after every edge.

Enumeration maps query vertices first (VF2-style backtracking with adjacency
candidates), then assigns data edges to query edges among the mapped vertex
pairs.  It shares no search code with the engine, which grows matches edge by
edge from primitives.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Iterable, Optional

from .graph_store import IN, OUT, DynamicGraph, EdgeRecord, StreamEdge
from .query_model import Match, QueryGraph


def _edge_candidates(graph: DynamicGraph, query: QueryGraph, qe, s: int, d: int) -> list:
    return [c for c in graph.iter_adjacent(s, OUT, qe.label)
            if c.dst == d and query.accepts(qe, c)]


class _Search:
    def __init__(self, graph: DynamicGraph, query: QueryGraph, window: float,
                 label_freq: Optional[Counter]):
        self.graph = graph
        self.query = query
        self.window = window
        self.freq = label_freq or Counter()
        self.found: dict = {}
        self.incident = [[] for _ in range(query.num_vertices)]
        for qe in query.edges:
            self.incident[qe.src].append(qe)
            self.incident[qe.dst].append(qe)

    def _order(self, mapped: set) -> list:
        """Connected vertex order, preferring vertices with rare incident labels."""
        order = []
        mapped = set(mapped)
        rest = set(range(self.query.num_vertices)) - mapped
        while rest:
            best = None
            for qv in sorted(rest):
                links = [qe for qe in self.incident[qv]
                         if (qe.src in mapped or qe.dst in mapped)]
                if mapped and not links:
                    continue
                rarity = min((self.freq.get(qe.label, 0) for qe in links), default=0)
                score = (-len(links), rarity, qv)
                if best is None or score < best[0]:
                    best = (score, qv)
            qv = best[1]
            order.append(qv)
            mapped.add(qv)
            rest.discard(qv)
        return order

    def _candidates(self, qv: int, vmap: dict) -> Iterable[int]:
        graph = self.graph
        for qe in self.incident[qv]:
            if qe.src == qv and qe.dst in vmap:
                return {c.src for c in graph.iter_adjacent(vmap[qe.dst], IN, qe.label)}
            if qe.dst == qv and qe.src in vmap:
                return {c.dst for c in graph.iter_adjacent(vmap[qe.src], OUT, qe.label)}
        return list(graph.vertices)

    def _feasible(self, qv: int, dv: int, vmap: dict) -> bool:
        if not self.query.vertex_accepts(qv, self.graph.vertex_label(dv)):
            return False
        for qe in self.incident[qv]:
            s = dv if qe.src == qv else vmap.get(qe.src)
            d = dv if qe.dst == qv else vmap.get(qe.dst)
            if s is None or d is None:
                continue
            if not _edge_candidates(self.graph, self.query, qe, s, d):
                return False
        return True

    def run(self, vmap: dict, fixed: dict) -> None:
        order = self._order(set(vmap))
        self._backtrack(order, 0, vmap, set(vmap.values()), fixed)

    def _backtrack(self, order, idx, vmap, used, fixed) -> None:
        if idx == len(order):
            self._assign_edges(vmap, fixed)
            return
        qv = order[idx]
        for dv in sorted(self._candidates(qv, vmap)):
            if dv in used or not self._feasible(qv, dv, vmap):
                continue
            vmap[qv] = dv
            used.add(dv)
            self._backtrack(order, idx + 1, vmap, used, fixed)
            used.discard(dv)
            del vmap[qv]

    def _assign_edges(self, vmap: dict, fixed: dict) -> None:
        q = self.query
        options = []
        for qe in q.edges:
            if qe.id in fixed:
                options.append([fixed[qe.id]])
            else:
                options.append(_edge_candidates(self.graph, q, qe, vmap[qe.src], vmap[qe.dst]))
        for combo in product(*options):
            ids = {e.id for e in combo}
            if len(ids) != len(combo):
                continue
            times = [e.timestamp for e in combo]
            if max(times) - min(times) >= self.window:
                continue
            m = Match({qe.id: e.id for qe, e in zip(q.edges, combo)}, dict(vmap),
                      min(times), max(times))
            self.found.setdefault(m.signature, m)


def enumerate_all_matches(graph: DynamicGraph, query: QueryGraph,
                          window: Optional[float] = None,
                          containing: Optional[EdgeRecord] = None,
                          label_freq: Optional[Counter] = None) -> dict:
    """Every embedding of ``query`` in the live graph with span below ``window``.

    With ``containing``, only embeddings that use that data edge.  Returns a
    dict from canonical signature to Match.
    """
    if window is None:
        window = graph.window
    search = _Search(graph, query, window, label_freq)
    if containing is not None:
        e = containing
        if e.src == e.dst or not graph.is_live(e.id):
            return {}
        for qe in query.edges:
            if query.accepts(qe, e):
                search.run({qe.src: e.src, qe.dst: e.dst}, {qe.id: e})
        return search.found
    # whole window: bind the rarest-labeled query edge to each live candidate
    freq = label_freq or Counter()
    anchor = min(query.edges, key=lambda qe: (qe.label is None, freq.get(qe.label, 0), qe.id))
    for vid in list(graph.vertices):
        for c in list(graph.iter_adjacent(vid, OUT, anchor.label)):
            if c.src != c.dst and query.accepts(anchor, c):
                search.run({anchor.src: c.src, anchor.dst: c.dst}, {anchor.id: c})
    return search.found


def full_matches_containing(graph: DynamicGraph, query: QueryGraph, e: EdgeRecord,
                            window: Optional[float] = None,
                            label_freq: Optional[Counter] = None) -> dict:
    """Enumerate the whole window from scratch, then keep matches that use ``e``."""
    found = enumerate_all_matches(graph, query, window, None, label_freq)
    return {sig: m for sig, m in found.items() if e.id in m.pairs.values()}


@dataclass
class OracleResult:
    per_edge: list = field(default_factory=list)  # signatures new at each edge
    runtime: float = 0.0

    @property
    def cumulative(self) -> set:
        out = set()
        for sigs in self.per_edge:
            out |= sigs
        return out

    @property
    def total(self) -> int:
        return sum(len(s) for s in self.per_edge)


ANCHORED = "anchored"
FULL = "full"


def run_oracle(stream: Iterable[StreamEdge], query: QueryGraph,
               window: Optional[float] = None,
               on_edge: Optional[Callable[[int, EdgeRecord, dict], None]] = None,
               mode: str = ANCHORED) -> OracleResult:
    """Per-edge baseline: after each insertion, enumerate the matches it completes.

    ``anchored`` searches outward from the new edge; ``full`` re-enumerates
    the whole window and filters, which is the non-incremental cost model.
    """
    if mode not in (ANCHORED, FULL):
        raise ValueError(f"unknown oracle mode {mode!r}")
    if window is None:
        window = query.window
    graph = DynamicGraph(window)
    freq: Counter = Counter()
    result = OracleResult()
    start = time.perf_counter()
    for item in stream:
        e = graph.edge(graph.add(item))
        freq[e.label] += 1
        if mode == FULL:
            found = full_matches_containing(graph, query, e, window, freq)
        else:
            found = enumerate_all_matches(graph, query, window, e, freq)
        result.per_edge.append(set(found))
        if on_edge is not None:
            on_edge(len(result.per_edge) - 1, e, found)
    result.runtime = time.perf_counter() - start
    return result


@dataclass
class Divergence:
    edge_index: int
    edge: str
    missing: list
    unexpected: list

    def describe(self, query: Optional[QueryGraph] = None) -> str:
        lines = [f"divergence at edge #{self.edge_index}: {self.edge}"]
        for name, sigs in (("missing", self.missing), ("unexpected", self.unexpected)):
            for sig in sigs:
                body = ",".join(f"{q}={d}" for q, d in sig)
                lines.append(f"  {name}: {body}")
        return "\n".join(lines)


@dataclass
class DiffReport:
    passed: bool
    edges_checked: int
    oracle_matches: int
    engine_matches: int
    divergence: Optional[Divergence] = None

    def describe(self) -> str:
        head = (f"{'PASS' if self.passed else 'FAIL'}: {self.edges_checked} edges, "
                f"oracle={self.oracle_matches} engine={self.engine_matches}")
        if self.divergence is not None:
            return head + "\n" + self.divergence.describe()
        return head


def incremental_diff_check(stream, query: QueryGraph, events: Iterable,
                           window: Optional[float] = None) -> DiffReport:
    """Compare per-edge engine emissions against the oracle's edge-restricted sets.

    ``events`` are the engine's MatchEvents for the same stream; edge ids line
    up because both sides number edges in ingestion order from zero.
    """
    stream = list(stream)
    by_edge: dict = {}
    engine_total = 0
    for ev in events:
        by_edge.setdefault(ev.edge_id, []).append(ev.match.signature)
        engine_total += 1
    state = {"div": None, "total": 0}

    def check(idx, e, found):
        state["total"] += len(found)
        if state["div"] is not None:
            return
        got = by_edge.get(e.id, [])
        want = set(found)
        if len(got) != len(set(got)) or set(got) != want:
            dupes = sorted(s for s in set(got) if got.count(s) > 1)
            state["div"] = Divergence(
                idx, repr(e), sorted(want - set(got)),
                sorted((set(got) - want) | set(dupes)))

    run_oracle(stream, query, window, check)
    stray = set(by_edge) - set(range(len(stream)))
    div = state["div"]
    if div is None and stray:
        div = Divergence(-1, f"events for unknown edges {sorted(stray)[:5]}", [], [])
    return DiffReport(div is None, len(stream), state["total"], engine_total, div)
