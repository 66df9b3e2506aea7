import math

import pytest

from sjstream.graph_store import DynamicGraph
from sjstream.oracle import enumerate_all_matches
from sjstream.query_model import CutSubgraph, Match, QueryGraph
from sjstream.sjtree import (
    SJTree, TreeError, get_join_key, prune_expired, space_estimate, table_sizes,
    update_sjtree,
)


def path3(window=math.inf):
    return QueryGraph.from_edges([("a", "x", "b"), ("b", "y", "c"), ("c", "z", "d")],
                                 window=window)


def path2(window=math.inf):
    return QueryGraph.from_edges([("a", "x", "b"), ("b", "y", "c")], window=window)


def leaf_match(graph, query, qi, eid):
    return Match.from_edges(query, {qi: graph.edge(eid)})


class TestConstruction:
    def test_left_deep_numbering(self):
        t = SJTree.left_deep(path3(), [(0,), (1,), (2,)])
        assert t.leaves == [0, 1, 3]
        assert t.root == 4
        assert t.nodes[2].left == 0 and t.nodes[2].right == 1
        assert t.nodes[4].left == 2 and t.nodes[4].right == 3
        assert t.nodes[2].cut == CutSubgraph((1,))
        assert t.nodes[4].cut == CutSubgraph((2,))

    def test_single_leaf_is_root(self):
        q = QueryGraph.from_edges([("a", "x", "b")])
        t = SJTree.left_deep(q, [(0,)])
        assert t.root == t.leaves[0] == 0

    def test_empty_cut_rejected(self):
        with pytest.raises(TreeError):
            SJTree.left_deep(path3(), [(0,), (2,), (1,)])

    def test_overlapping_leaves_rejected(self):
        with pytest.raises(TreeError):
            SJTree.left_deep(path3(), [(0, 1), (1, 2)])

    def test_incomplete_cover_rejected(self):
        with pytest.raises(TreeError):
            SJTree.left_deep(path3(), [(0,), (1,)])

    def test_disconnected_leaf_rejected(self):
        with pytest.raises(TreeError):
            SJTree.left_deep(path3(), [(0, 2), (1,)])

    def test_serialization_roundtrip(self):
        q = path3()
        t = SJTree.left_deep(q, [(1, 2), (0,)])
        text = t.dumps()
        assert text.splitlines()[0] == "node 0 parent=2 sibling=1 leaf=0 edges=1,2 cut=-"
        again = SJTree.loads(text, q)
        assert again.dumps() == text
        assert again.leaf_edge_sets() == [(1, 2), (0,)]

    def test_loads_rejects_garbage(self):
        with pytest.raises(TreeError):
            SJTree.loads("node 0 parent=-\n", path3())

    def test_loads_rejects_wrong_cut(self):
        text = SJTree.left_deep(path3(), [(0,), (1,), (2,)]).dumps().replace("cut=1", "cut=0")
        with pytest.raises(TreeError):
            SJTree.loads(text, path3())


class TestUpdate:
    def setup_method(self):
        self.q = path2(window=10)
        self.tree = SJTree.left_deep(self.q, [(0,), (1,)])
        self.g = DynamicGraph(10)
        self.out = []

    def test_sibling_empty_stores(self):
        e = self.g.add_edge("u", "v", "x", 0)
        assert update_sjtree(self.tree, 0, leaf_match(self.g, self.q, 0, e), self.out.append)
        assert self.out == []
        assert table_sizes(self.tree) == {0: 1, 1: 0, 2: 0}

    def test_one_joinable_sibling_emits(self):
        e0 = self.g.add_edge("u", "v", "x", 0)
        e1 = self.g.add_edge("v", "w", "y", 1)
        update_sjtree(self.tree, 0, leaf_match(self.g, self.q, 0, e0), self.out.append)
        update_sjtree(self.tree, 1, leaf_match(self.g, self.q, 1, e1), self.out.append)
        assert [m.signature for m in self.out] == [((0, e0), (1, e1))]
        # cross-check with the oracle on the same two edges
        assert set(enumerate_all_matches(self.g, self.q)) == {self.out[0].signature}

    def test_window_violation_not_emitted(self):
        g = DynamicGraph()
        e0 = g.add_edge("u", "v", "x", 0)
        e1 = g.add_edge("v", "w", "y", 10)
        update_sjtree(self.tree, 0, leaf_match(g, self.q, 0, e0), self.out.append)
        update_sjtree(self.tree, 1, leaf_match(g, self.q, 1, e1), self.out.append)
        assert self.out == []
        assert table_sizes(self.tree)[1] == 1

    def test_idempotent_insert(self):
        e = self.g.add_edge("u", "v", "x", 0)
        lm = leaf_match(self.g, self.q, 0, e)
        assert update_sjtree(self.tree, 0, lm, self.out.append)
        assert not update_sjtree(self.tree, 0, lm, self.out.append)
        assert table_sizes(self.tree)[0] == 1

    def test_root_insert_rejected(self):
        e = self.g.add_edge("u", "v", "x", 0)
        with pytest.raises(TreeError):
            update_sjtree(self.tree, 2, leaf_match(self.g, self.q, 0, e), self.out.append)

    def test_stale_entry_deleted_on_probe(self):
        e0 = self.g.add_edge("u", "v", "x", 0)
        update_sjtree(self.tree, 0, leaf_match(self.g, self.q, 0, e0), self.out.append, now=0)
        e1 = self.g.add_edge("v", "w", "y", 11)
        update_sjtree(self.tree, 1, leaf_match(self.g, self.q, 1, e1), self.out.append, now=11)
        assert self.out == []
        assert table_sizes(self.tree)[0] == 0

    def test_three_leaf_cascade(self):
        q = path3()
        tree = SJTree.left_deep(q, [(0,), (1,), (2,)])
        g = DynamicGraph()
        ids = [g.add_edge("a", "b", "x", 0), g.add_edge("b", "c", "y", 1),
               g.add_edge("c", "d", "z", 2)]
        # deliver in reverse to exercise storing at the last leaf first
        for qi in (2, 1, 0):
            update_sjtree(tree, tree.leaves[qi], leaf_match(g, q, qi, ids[qi]), self.out.append)
        assert [m.signature for m in self.out] == [tuple(enumerate(ids))]


class TestMaintenance:
    def test_get_join_key(self):
        m = Match({0: 1}, {0: 4, 1: 9}, 0, 0)
        assert get_join_key(CutSubgraph((1,)), m) == (9,)

    def test_prune_fresh(self):
        q = path2(window=10)
        t = SJTree.left_deep(q, [(0,), (1,)])
        t.nodes[0].add((1,), Match({0: 0}, {0: 0, 1: 1}, 5, 5))
        assert prune_expired(t, 10) == 0

    def test_prune_old(self):
        q = path2(window=10)
        t = SJTree.left_deep(q, [(0,), (1,)])
        t.nodes[0].add((1,), Match({0: 0}, {0: 0, 1: 1}, 0, 0))
        assert prune_expired(t, 11) == 1
        assert len(t.nodes[0]) == 0

    def test_fresh_tree_sizes(self):
        t = SJTree.left_deep(path3(), [(0,), (1,), (2,)])
        assert set(table_sizes(t).values()) == {0}

    def test_leaf_count_after_n(self):
        q = path2()
        t = SJTree.left_deep(q, [(0,), (1,)])
        g = DynamicGraph()
        for i in range(5):
            e = g.add_edge(f"s{i}", f"d{i}", "x", i)
            update_sjtree(t, 0, leaf_match(g, q, 0, e), lambda _: None)
        assert table_sizes(t)[0] == 5

    def test_space_estimate(self):
        q = path3()
        t = SJTree.left_deep(q, [(0, 1), (2,)])
        t.nodes[0].add((1,), Match({0: 0, 1: 1}, {0: 0, 1: 1, 2: 2}, 0, 1))
        t.nodes[1].add((2,), Match({2: 2}, {2: 2, 3: 3}, 2, 2))
        t.nodes[1].add((3,), Match({2: 3}, {2: 3, 3: 4}, 2, 2))
        assert space_estimate(t) == 2 * 1 + 1 * 2
