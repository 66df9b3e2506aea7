"""Subgraph Join Tree: a left-deep decomposition of a query that stores partial matches.

Leaves hold small query subgraphs (primitives) in join order; every internal
node joins its left subtree with the next leaf on the right.  Each node keeps
a hash table from join key to the partial matches found so far.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .query_model import (
    CutSubgraph, Match, QueryGraph, join_matches, project,
)


class TreeError(ValueError):
    pass


@dataclass(eq=False)
class SJTreeNode:
    id: int
    edges: tuple
    vertices: frozenset
    parent: Optional[int] = None
    sibling: Optional[int] = None
    left: Optional[int] = None
    right: Optional[int] = None
    cut: Optional[CutSubgraph] = None
    leaf: Optional[int] = None
    table: dict = field(default_factory=dict)   # join key -> {signature: Match}
    index: dict = field(default_factory=dict)   # signature -> join key

    @property
    def is_leaf(self) -> bool:
        return self.leaf is not None

    def __len__(self):
        return len(self.index)

    def matches(self) -> list:
        return [m for bucket in self.table.values() for m in bucket.values()]

    def add(self, key, m: Match) -> bool:
        sig = m.signature
        if sig in self.index:
            return False
        self.index[sig] = key
        bucket = self.table.get(key)
        if bucket is None:
            self.table[key] = {sig: m}
        else:
            bucket[sig] = m
        return True

    def discard(self, sig) -> None:
        key = self.index.pop(sig)
        bucket = self.table[key]
        del bucket[sig]
        if not bucket:
            del self.table[key]

    def clear(self) -> None:
        self.table.clear()
        self.index.clear()


class SJTree:
    def __init__(self, query: QueryGraph, nodes: list, root: int, leaves: list,
                 window: Optional[float] = None):
        self.query = query
        self.nodes = nodes
        self.root = root
        self.leaves = leaves
        self.window = query.window if window is None else window
        self._validate()

    @classmethod
    def left_deep(cls, query: QueryGraph, leaf_edges: Iterable[Iterable[int]],
                  window: Optional[float] = None) -> "SJTree":
        """Assemble leaves (in join order) into a left-deep binary tree."""
        leaf_edges = [tuple(sorted(es)) for es in leaf_edges]
        if not leaf_edges:
            raise TreeError("no leaves")
        nodes: list[SJTreeNode] = []

        def new_node(edges, **kw):
            node = SJTreeNode(len(nodes), tuple(sorted(edges)),
                              query.edge_vertices(edges), **kw)
            nodes.append(node)
            return node

        acc = new_node(leaf_edges[0], leaf=0)
        leaves = [acc.id]
        for ordinal, edges in enumerate(leaf_edges[1:], 1):
            right = new_node(edges, leaf=ordinal)
            leaves.append(right.id)
            cut = CutSubgraph.between(query, acc.edges, right.edges)
            if not cut:
                raise TreeError(f"leaf {ordinal} shares no vertex with the "
                                f"leaves before it")
            parent = new_node(acc.edges + right.edges, left=acc.id,
                              right=right.id, cut=cut)
            acc.parent = right.parent = parent.id
            acc.sibling, right.sibling = right.id, acc.id
            acc = parent
        return cls(query, nodes, acc.id, leaves, window)

    def _validate(self) -> None:
        q = self.query
        root = self.nodes[self.root]
        if set(root.edges) != set(range(len(q.edges))):
            raise TreeError("root subgraph does not cover the query")
        seen: set[int] = set()
        for nid in self.leaves:
            leaf = self.nodes[nid]
            if seen & set(leaf.edges):
                raise TreeError(f"leaf {leaf.leaf} overlaps an earlier leaf")
            if not q.is_connected(leaf.edges):
                raise TreeError(f"leaf {leaf.leaf} is not connected")
            seen |= set(leaf.edges)
        for node in self.nodes:
            if node.is_leaf:
                continue
            left = self.nodes[node.left]
            right = self.nodes[node.right]
            if not right.is_leaf:
                raise TreeError(f"node {node.id}: right child must be a leaf")
            if set(node.edges) != set(left.edges) | set(right.edges):
                raise TreeError(f"node {node.id} is not the join of its children")
            expected = CutSubgraph.between(q, left.edges, right.edges)
            if node.cut != expected:
                raise TreeError(f"node {node.id}: cut {node.cut} != {expected}")
            if not node.cut:
                raise TreeError(f"node {node.id}: empty cut")

    # -- structure helpers ----------------------------------------------

    def leaf_node(self, ordinal: int) -> SJTreeNode:
        return self.nodes[self.leaves[ordinal]]

    @property
    def root_node(self) -> SJTreeNode:
        return self.nodes[self.root]

    def leaf_edge_sets(self) -> list:
        return [self.nodes[n].edges for n in self.leaves]

    def accumulated(self, ordinal: int) -> SJTreeNode:
        """Node whose subgraph is the union of leaves 0..ordinal."""
        if ordinal == 0:
            return self.leaf_node(0)
        return self.nodes[self.leaf_node(ordinal).parent]

    def clear(self) -> None:
        for node in self.nodes:
            node.clear()

    # -- serialization ----------------------------------------------------

    def dumps(self) -> str:
        def opt(v):
            return "-" if v is None else str(v)

        def lst(vs):
            return ",".join(map(str, vs)) if vs else "-"

        lines = []
        for node in self.nodes:
            cut = node.cut.vertices if node.cut else ()
            lines.append(f"node {node.id} parent={opt(node.parent)} "
                         f"sibling={opt(node.sibling)} leaf={opt(node.leaf)} "
                         f"edges={lst(node.edges)} cut={lst(cut)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, query: QueryGraph,
              window: Optional[float] = None) -> "SJTree":
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] != "node" or len(parts) != 7:
                raise TreeError(f"line {lineno}: malformed node line")
            fields = dict(p.split("=", 1) for p in parts[2:])
            raw[int(parts[1])] = fields
        if sorted(raw) != list(range(len(raw))):
            raise TreeError("node ids must be dense and start at 0")

        def opt(v):
            return None if v == "-" else int(v)

        def lst(v):
            return () if v == "-" else tuple(int(x) for x in v.split(","))

        nodes = []
        for nid in range(len(raw)):
            f = raw[nid]
            edges = lst(f["edges"])
            cut = lst(f["cut"])
            nodes.append(SJTreeNode(
                nid, tuple(sorted(edges)), query.edge_vertices(edges),
                parent=opt(f["parent"]), sibling=opt(f["sibling"]),
                leaf=opt(f["leaf"]),
                cut=CutSubgraph(tuple(sorted(cut))) if cut else None))
        roots = [n.id for n in nodes if n.parent is None]
        if len(roots) != 1:
            raise TreeError("tree must have exactly one root")
        for node in nodes:
            kids = [n for n in nodes if n.parent == node.id]
            if node.is_leaf:
                if kids:
                    raise TreeError(f"leaf node {node.id} has children")
                continue
            if len(kids) != 2:
                raise TreeError(f"internal node {node.id} needs two children")
            a, b = kids
            # the left child is the accumulated subtree, the right child a later leaf
            if a.is_leaf and (not b.is_leaf or a.leaf > b.leaf):
                a, b = b, a
            node.left, node.right = a.id, b.id
            if node.cut is None:
                raise TreeError(f"internal node {node.id} has no cut")
        leaves = sorted((n for n in nodes if n.is_leaf), key=lambda n: n.leaf)
        if [n.leaf for n in leaves] != list(range(len(leaves))):
            raise TreeError("leaf ordinals must be 0..k-1")
        return cls(query, nodes, roots[0], [n.id for n in leaves], window)


# -- operations ---------------------------------------------------------------

def get_join_key(cut: CutSubgraph, m: Match) -> tuple:
    return project(m, cut)


def update_sjtree(tree: SJTree, node_id: int, m: Match,
                  sink: Callable[[Match], None], now: Optional[int] = None,
                  on_insert: Optional[Callable[[SJTreeNode, Match], None]] = None
                  ) -> bool:
    """Insert ``m`` at a non-root node, joining upward through the tree.

    Complete matches reaching the root go to ``sink``.  ``on_insert`` is told
    about every match newly stored in some node's table.  Returns False when
    ``m`` was already stored at this node, in which case nothing happens.
    """
    nodes = tree.nodes
    node = nodes[node_id]
    if node.parent is None:
        raise TreeError("matches of the root are emitted, never stored")
    if m.signature in node.index:
        return False
    parent = nodes[node.parent]
    cut = parent.cut
    window = tree.window
    key = project(m, cut)
    sibling = nodes[node.sibling]
    bucket = sibling.table.get(key)
    if bucket:
        horizon = -math.inf if now is None else now - window
        stale = []
        for sig, ms in list(bucket.items()):
            if ms.earliest < horizon:
                stale.append(sig)
                continue
            sup = join_matches(ms, m, cut)
            if sup is None or sup.latest - sup.earliest >= window:
                continue
            if parent.parent is None:
                sink(sup)
            else:
                update_sjtree(tree, parent.id, sup, sink, now, on_insert)
        for sig in stale:
            if sig in sibling.index:
                sibling.discard(sig)
    node.add(key, m)
    if on_insert is not None:
        on_insert(node, m)
    return True


def prune_expired(tree: SJTree, now: int) -> int:
    """Drop stored matches whose earliest edge is older than ``now - window``."""
    horizon = now - tree.window
    removed = 0
    for node in tree.nodes:
        stale = [sig for bucket in node.table.values()
                 for sig, m in bucket.items() if m.earliest < horizon]
        for sig in stale:
            node.discard(sig)
        removed += len(stale)
    return removed


def table_sizes(tree: SJTree) -> dict:
    return {node.id: len(node) for node in tree.nodes}


def space_estimate(tree: SJTree) -> int:
    """Sum over nodes of (edges in the node's subgraph) x (stored matches)."""
    return sum(len(node.edges) * len(node) for node in tree.nodes)
