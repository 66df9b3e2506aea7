"""Greedy selectivity-ordered query decomposition and strategy selection."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

from .query_model import QueryGraph
from .selectivity import (
    EDGE, LABEL_ONLY, PATH2, MapConfig, PrimitiveKey, SelectivityTable,
    UndefinedSelectivity, expected_selectivity, query_primitive_key,
    relative_selectivity,
)
from .sjtree import SJTree

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.001

SINGLE = "single"
PATH = "path"
AUTO = "auto"
EAGER = "eager"
LAZY = "lazy"


@dataclass(frozen=True)
class Strategy:
    decomposition: str = AUTO
    execution: str = LAZY

    def __post_init__(self):
        if self.decomposition not in (SINGLE, PATH, AUTO):
            raise ValueError(f"unknown decomposition {self.decomposition!r}")
        if self.execution not in (EAGER, LAZY):
            raise ValueError(f"unknown execution mode {self.execution!r}")

    @property
    def name(self) -> str:
        base = {SINGLE: "Single", PATH: "Path", AUTO: "Auto"}[self.decomposition]
        return base + ("Lazy" if self.execution == LAZY else "")

    @property
    def lazy(self) -> bool:
        return self.execution == LAZY

    @classmethod
    def parse(cls, name: str) -> "Strategy":
        lowered = name.lower()
        execution = LAZY if lowered.endswith("lazy") else EAGER
        base = lowered[:-4] if execution == LAZY else lowered
        return cls(base, execution)


ALL_STRATEGIES = tuple(Strategy.parse(n) for n in
                       ("Single", "SingleLazy", "Path", "PathLazy"))


@dataclass
class PrimitiveSet:
    entries: list  # (PrimitiveKey, selectivity), most selective first
    table: Optional[SelectivityTable] = None

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    @property
    def keys(self) -> list:
        return [k for k, _ in self.entries]


def query_fragments(query: QueryGraph, edge_ids, size: int) -> list:
    """Connected 1-edge or 2-edge fragments among ``edge_ids``, by ascending ids."""
    edge_ids = sorted(edge_ids)
    if size == 1:
        return [(i,) for i in edge_ids]
    out = []
    for a, b in combinations(edge_ids, 2):
        ea, eb = query.edges[a], query.edges[b]
        if {ea.src, ea.dst} & {eb.src, eb.dst}:
            out.append((a, b))
    return out


def primitive_set(table: SelectivityTable, query: Optional[QueryGraph] = None,
                  kinds=(PATH2, EDGE), cfg: MapConfig = LABEL_ONLY,
                  include_unseen_paths: bool = False) -> PrimitiveSet:
    """Ordered primitives: each kind in the given priority, ascending selectivity.

    Keys come from the table plus the query's own fragments (so wildcard and
    never-seen primitives are represented).  Unseen 2-edge paths are left out
    unless asked for, which makes their fragment fall back to 1-edge leaves;
    unseen single edges stay in with selectivity 0.
    """
    entries = []
    for kind in kinds:
        keys = set(table.keys(kind))
        if query is not None:
            size = 1 if kind == EDGE else 2
            for frag in query_fragments(query, range(len(query.edges)), size):
                keys.add(query_primitive_key(query, frag, cfg))
        total = table.total(kind)
        scored = []
        for key in keys:
            count = table.count(key)
            if count == 0 and kind == PATH2 and not include_unseen_paths:
                continue
            scored.append((key, count / total if total else 0.0))
        scored.sort(key=lambda ks: (ks[1], ks[0]))
        entries.extend(scored)
    return PrimitiveSet(entries, table)


class Residual:
    """What is left of a query during decomposition: a set of edge ids."""

    def __init__(self, query: QueryGraph, edges=None):
        self.query = query
        self.edges = frozenset(range(len(query.edges)) if edges is None else edges)

    @property
    def vertices(self) -> frozenset:
        return self.query.edge_vertices(self.edges)

    def __len__(self):
        return len(self.edges)

    def __bool__(self):
        return bool(self.edges)


def remove_subgraph(residual: Residual, sub_edges) -> Residual:
    """Drop the edges of ``sub_edges``; vertices vanish once they lose all edges."""
    return Residual(residual.query, residual.edges - set(sub_edges))


def find_primitive_instance(query: QueryGraph, residual: Residual, frontier,
                            key: PrimitiveKey, cfg: MapConfig = LABEL_ONLY
                            ) -> Optional[tuple]:
    """Lowest-id fragment of the residual whose key is ``key``.

    With a non-empty frontier the fragment must contain a frontier vertex.
    """
    size = 1 if key.kind == EDGE else 2
    for frag in query_fragments(query, residual.edges, size):
        if frontier and not (query.edge_vertices(frag) & frontier):
            continue
        if query_primitive_key(query, frag, cfg) == key:
            return frag
    return None


def build_sjtree(query: QueryGraph, primitives: PrimitiveSet,
                 cfg: MapConfig = LABEL_ONLY, window: Optional[float] = None) -> SJTree:
    """Greedy left-deep decomposition.

    Repeatedly takes the first primitive (in ``primitives`` order) that has an
    instance in the residual query touching the frontier, removes it, and
    appends it as the next leaf.
    """
    residual = Residual(query)
    frontier: set = set()
    leaves = []
    while residual:
        chosen = None
        for key, _ in primitives:
            chosen = find_primitive_instance(query, residual, frontier, key, cfg)
            if chosen:
                break
        if chosen is None and frontier:
            for key, _ in primitives:
                chosen = find_primitive_instance(query, residual, None, key, cfg)
                if chosen:
                    break
        if chosen is None:
            chosen = (min(residual.edges),)
            log.warning("no primitive covers query edge %d; using it as a 1-edge leaf",
                        chosen[0])
        leaves.append(chosen)
        frontier |= query.edge_vertices(chosen)
        residual = remove_subgraph(residual, chosen)
    tree = SJTree.left_deep(query, leaves, window)
    if primitives.table is not None:
        _note_decomposable_leaves(tree, primitives.table, cfg)
    return tree


def _note_decomposable_leaves(tree: SJTree, table: SelectivityTable, cfg: MapConfig) -> None:
    dbar = table.mean_degree
    if not dbar:
        return
    for ordinal, edges in enumerate(tree.leaf_edge_sets()):
        if len(edges) < 2:
            continue
        q = tree.query
        freq = table.count(query_primitive_key(q, edges, cfg))
        bound = freq / (dbar * len(q.edge_vertices(edges)))
        for qi in edges:
            sub = table.count(query_primitive_key(q, (qi,), cfg))
            if sub > bound:
                log.info("leaf %d: sub-edge %d has frequency %d > %.3g; "
                         "splitting this leaf would pay off", ordinal, qi, sub, bound)


@dataclass
class StrategyChoice:
    strategy: Strategy
    single_tree: SJTree
    path_tree: SJTree
    single_selectivity: float
    path_selectivity: float
    relative: Optional[float]
    threshold: float
    warnings: list = field(default_factory=list)

    @property
    def tree(self) -> SJTree:
        return self.path_tree if self.strategy.decomposition == PATH else self.single_tree


def single_edge_tree(query, table, cfg=LABEL_ONLY, window=None) -> SJTree:
    return build_sjtree(query, primitive_set(table, query, (EDGE,), cfg), cfg, window)


def path_tree(query, table, cfg=LABEL_ONLY, window=None) -> SJTree:
    return build_sjtree(query, primitive_set(table, query, (PATH2, EDGE), cfg), cfg, window)


def select_strategy(query: QueryGraph, table: SelectivityTable,
                    threshold: float = DEFAULT_THRESHOLD,
                    cfg: MapConfig = LABEL_ONLY) -> StrategyChoice:
    """Pick PathLazy when the path decomposition is far more selective, else SingleLazy."""
    t1 = single_edge_tree(query, table, cfg)
    t2 = path_tree(query, table, cfg)
    s1 = expected_selectivity(t1, table, cfg)
    s2 = expected_selectivity(t2, table, cfg)
    warnings = []
    try:
        xi = relative_selectivity(t2, t1, table, cfg)
    except UndefinedSelectivity:
        xi = None
        warnings.append("query contains an edge type never observed; using PathLazy")
        log.warning(warnings[-1])
        strategy = Strategy(PATH, LAZY)
    else:
        strategy = Strategy(PATH if xi < threshold else SINGLE, LAZY)
    return StrategyChoice(strategy, t1, t2, s1, s2, xi, threshold, warnings)


def tree_for(strategy: Strategy, query: QueryGraph, table: SelectivityTable,
             cfg: MapConfig = LABEL_ONLY, threshold: float = DEFAULT_THRESHOLD
             ) -> tuple:
    """Tree for a concrete or ``auto`` strategy; returns (tree, resolved strategy)."""
    if strategy.decomposition == SINGLE:
        return single_edge_tree(query, table, cfg), strategy
    if strategy.decomposition == PATH:
        return path_tree(query, table, cfg), strategy
    choice = select_strategy(query, table, threshold, cfg)
    return choice.tree, Strategy(choice.strategy.decomposition, strategy.execution)


@dataclass
class LeafOrderReport:
    frequencies: list
    ascending: bool
    rarest_first: bool
    violations: list


def leaf_order_check(tree: SJTree, table: SelectivityTable,
                     cfg: MapConfig = LABEL_ONLY) -> LeafOrderReport:
    """Advisory check of leaf ordering against primitive frequencies.

    ``rarest_first``: leaf 0 is no more frequent than any same-size fragment of
    the query.  ``ascending``: leaf frequencies never decrease in join order.
    """
    q = tree.query
    freqs = [table.count(query_primitive_key(q, es, cfg)) for es in tree.leaf_edge_sets()]
    violations = []
    for i in range(1, len(freqs)):
        if freqs[i] < freqs[i - 1]:
            violations.append(f"leaf {i} (freq {freqs[i]}) is rarer than "
                              f"leaf {i - 1} (freq {freqs[i - 1]})")
    size = len(tree.leaf_edge_sets()[0])
    rarest = min(table.count(query_primitive_key(q, frag, cfg))
                 for frag in query_fragments(q, range(len(q.edges)), size))
    rarest_first = freqs[0] <= rarest
    if not rarest_first:
        violations.append(f"leaf 0 (freq {freqs[0]}) is not the rarest "
                          f"{size}-edge fragment (freq {rarest})")
    return LeafOrderReport(freqs, not any("rarer" in v for v in violations),
                           rarest_first, violations)
