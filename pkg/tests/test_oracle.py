import math
import random

import pytest
from hypothesis import given, strategies as st

from conftest import random_stream, random_tree_query
from sjstream.engine import MatchEvent
from sjstream.graph_store import DynamicGraph, StreamEdge
from sjstream.oracle import (
    ANCHORED, FULL, enumerate_all_matches, full_matches_containing, incremental_diff_check,
    run_oracle,
)
from sjstream.query_model import Match, QueryGraph


def edge(ts, s, lab, d):
    return StreamEdge(ts, s, "ip", lab, d, "ip", {})


def graph_of(triples, window=math.inf):
    g = DynamicGraph(window)
    for t, (s, lab, d) in enumerate(triples):
        g.add_edge(s, d, lab, t)
    return g


class TestEnumerate:
    def test_wildcard_single_edge(self):
        g = graph_of([("a", "x", "b"), ("b", "y", "c"), ("c", "z", "a"), ("a", "x", "c")])
        q = QueryGraph.from_edges([("p", "*", "q")])
        assert len(enumerate_all_matches(g, q)) == 4

    def test_three_edge_path(self):
        g = graph_of([("a", "x", "b"), ("b", "y", "c"), ("c", "z", "d"), ("q", "y", "r")])
        q = QueryGraph.from_edges([("1", "x", "2"), ("2", "y", "3"), ("3", "z", "4")])
        assert list(enumerate_all_matches(g, q)) == [((0, 0), (1, 1), (2, 2))]

    def test_triangle_free(self):
        g = graph_of([("a", "x", "b"), ("b", "x", "c"), ("c", "x", "d")])
        q = QueryGraph.from_edges([("1", "x", "2"), ("2", "x", "3"), ("3", "x", "1")])
        assert enumerate_all_matches(g, q) == {}

    def test_vertex_injective(self):
        # a 2-path would need u twice
        g = graph_of([("u", "x", "v"), ("v", "x", "u")])
        q = QueryGraph.from_edges([("1", "x", "2"), ("2", "x", "3")])
        assert enumerate_all_matches(g, q) == {}

    def test_parallel_edges_distinct(self):
        g = graph_of([("u", "x", "v"), ("u", "x", "v")])
        q = QueryGraph.from_edges([("1", "x", "2")])
        assert len(enumerate_all_matches(g, q)) == 2

    def test_window_respected(self):
        g = graph_of([("a", "x", "b"), ("b", "y", "c")])
        q = QueryGraph.from_edges([("1", "x", "2"), ("2", "y", "3")])
        assert enumerate_all_matches(g, q, window=1) == {}
        assert len(enumerate_all_matches(g, q, window=2)) == 1

    def test_containing_filters(self):
        g = graph_of([("a", "x", "b"), ("c", "x", "d")])
        q = QueryGraph.from_edges([("1", "x", "2")])
        assert list(enumerate_all_matches(g, q, containing=g.edge(1))) == [((0, 1),)]


class TestRunOracle:
    def test_empty_stream(self):
        q = QueryGraph.from_edges([("1", "x", "2")])
        result = run_oracle([], q)
        assert result.per_edge == [] and result.total == 0
        assert incremental_diff_check([], q, []).passed

    def test_per_edge_new_matches(self):
        q = QueryGraph.from_edges([("1", "x", "2"), ("2", "y", "3")])
        stream = [edge(0, "a", "x", "b"), edge(1, "b", "y", "c"), edge(2, "b", "y", "d")]
        result = run_oracle(stream, q)
        assert [len(s) for s in result.per_edge] == [0, 1, 1]

    def test_bad_mode(self):
        q = QueryGraph.from_edges([("1", "x", "2")])
        with pytest.raises(ValueError):
            run_oracle([], q, mode="psychic")

    def test_diff_reports_unexpected(self):
        q = QueryGraph.from_edges([("1", "x", "2")])
        stream = [edge(0, "a", "y", "b")]
        bogus = [MatchEvent(Match({0: 0}, {0: 0, 1: 1}, 0, 0), 0, 0)]
        report = incremental_diff_check(stream, q, bogus)
        assert not report.passed and report.divergence.unexpected
        assert "unexpected" in report.describe()

    def test_diff_reports_duplicates(self):
        q = QueryGraph.from_edges([("1", "x", "2")])
        stream = [edge(0, "a", "x", "b")]
        ev = MatchEvent(Match({0: 0}, {0: 0, 1: 1}, 0, 0), 0, 0)
        assert not incremental_diff_check(stream, q, [ev, ev]).passed


class TestModes:
    @given(st.integers(0, 2**32 - 1), st.sampled_from([4, 30, math.inf]), st.integers(1, 4))
    def test_full_equals_anchored(self, seed, window, size):
        rng = random.Random(seed)
        q = random_tree_query(rng, size, "ab", window=window)
        stream = random_stream(rng, 60, 8, "ab", stride=0)
        a = run_oracle(stream, q, mode=ANCHORED)
        b = run_oracle(stream, q, mode=FULL)
        assert a.per_edge == b.per_edge

    @given(st.integers(0, 2**32 - 1))
    def test_cumulative_equals_final_window(self, seed):
        # with an infinite window nothing expires, so the union of per-edge sets
        # is exactly the set of embeddings in the final graph
        rng = random.Random(seed)
        q = random_tree_query(rng, 3, "ab")
        stream = random_stream(rng, 40, 6, "ab")
        g = DynamicGraph()
        for item in stream:
            g.add(item)
        assert run_oracle(stream, q).cumulative == set(enumerate_all_matches(g, q))

    def test_full_containing(self):
        g = graph_of([("a", "x", "b"), ("b", "x", "c")])
        q = QueryGraph.from_edges([("1", "x", "2")])
        assert list(full_matches_containing(g, q, g.edge(1))) == [((0, 1),)]
