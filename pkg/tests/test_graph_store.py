import math

import pytest
from hypothesis import given, strategies as st

from sjstream.graph_store import (
    BOTH, IN, OUT, DynamicGraph, OutOfOrderError, StreamEdge, format_stream_line,
    load_stream, parse_stream_line, parse_window, write_stream,
)


class TestAddEdge:
    def test_first_insertion(self):
        g = DynamicGraph(10)
        eid = g.add_edge("a", "b", "tcp", 0)
        assert eid == 0
        assert g.edge_count == 1
        assert len(g.vertices) == 2

    def test_window_boundary_strict(self):
        g = DynamicGraph(10)
        first = g.add_edge("a", "b", "tcp", 0)
        g.add_edge("c", "d", "tcp", 11)
        assert not g.is_live(first)

    def test_edge_exactly_window_old_is_live(self):
        g = DynamicGraph(10)
        first = g.add_edge("a", "b", "tcp", 0)
        g.add_edge("c", "d", "tcp", 10)
        assert g.is_live(first)

    def test_parallel_edges(self):
        g = DynamicGraph(10)
        a = g.add_edge("a", "b", "tcp", 5)
        b = g.add_edge("a", "b", "tcp", 5)
        assert a != b
        assert g.edge_count == 2
        assert len(g.neighbors(g.vertex_id("a"), OUT, "tcp")) == 2

    def test_out_of_order_rejected(self):
        g = DynamicGraph(10)
        g.add_edge("a", "b", "tcp", 5)
        with pytest.raises(OutOfOrderError):
            g.add_edge("a", "b", "tcp", 4)

    def test_negative_timestamp(self):
        with pytest.raises(ValueError):
            DynamicGraph().add_edge("a", "b", "tcp", -1)

    def test_relabel_conflict(self):
        g = DynamicGraph()
        g.add_edge("a", "b", "tcp", 0, "host", "host")
        with pytest.raises(ValueError):
            g.add_edge("a", "c", "tcp", 1, "router", "host")


class TestEvict:
    def test_nothing_expired(self):
        g = DynamicGraph(100)
        g.add_edge("a", "b", "x", 0)
        assert g.evict_expired() == 0

    def test_two_of_three_expired_on_add(self):
        g = DynamicGraph(5)
        g.add_edge("a", "b", "x", 0)
        g.add_edge("a", "c", "x", 1)
        g.add_edge("a", "d", "x", 7)
        assert g.edge_count == 1

    def test_returns_count(self):
        # shrink the window after the fact so an explicit call has work to do
        g = DynamicGraph(5)
        g.add_edge("a", "b", "x", 2)
        g.add_edge("a", "c", "x", 3)
        g.add_edge("a", "d", "x", 6)
        assert g.edge_count == 3
        g.window = 0
        assert g.evict_expired() == 2
        assert g.edge_count == 1

    def test_isolated_vertex_removed(self):
        g = DynamicGraph(5)
        g.add_edge("a", "b", "x", 0)
        g.add_edge("c", "d", "x", 10)
        assert g.vertex_id("a") is not None  # id mapping persists
        assert not g.has_vertex(g.vertex_id("a"))
        assert g.neighbors(g.vertex_id("a")) == []

    def test_removal_listener(self):
        g = DynamicGraph(1)
        gone = []
        g.vertex_removed_listeners.append(gone.append)
        g.add_edge("a", "b", "x", 0)
        g.add_edge("c", "d", "x", 5)
        assert sorted(gone) == [0, 1]


class TestNeighbors:
    def setup_method(self):
        self.g = DynamicGraph()
        self.g.add_edge("v", "a", "tcp", 0)
        self.g.add_edge("v", "b", "udp", 1)
        self.g.add_edge("c", "v", "tcp", 2)
        self.v = self.g.vertex_id("v")

    def test_label_filter(self):
        assert len(self.g.neighbors(self.v, OUT, "tcp")) == 1

    def test_both_no_filter(self):
        assert len(self.g.neighbors(self.v, BOTH)) == 3

    def test_in(self):
        assert [e.label for e in self.g.neighbors(self.v, IN)] == ["tcp"]

    def test_unknown_vertex(self):
        assert self.g.neighbors(999) == []

    def test_evicted_never_returned(self):
        g = DynamicGraph(3)
        g.add_edge("v", "a", "tcp", 0)
        g.add_edge("v", "b", "tcp", 5)
        assert [e.timestamp for e in g.neighbors(g.vertex_id("v"))] == [5]


class TestStreamFormat:
    def test_roundtrip(self, tmp_path):
        edges = [StreamEdge(0, "a", "ip", "tcp", "b", "ip", {}),
                 StreamEdge(3, "b", "ip", "udp", "c", "ip", {"port": "80", "bytes": "10"})]
        path = tmp_path / "s.tsv"
        write_stream(path, edges)
        assert load_stream(path) == edges

    def test_comments_and_blank(self):
        assert parse_stream_line("# hello") is None
        assert parse_stream_line("") is None

    def test_bad_column_count(self):
        with pytest.raises(ValueError):
            parse_stream_line("0\ta\tip\ttcp\tb")

    def test_bad_timestamp(self):
        with pytest.raises(ValueError):
            parse_stream_line("x\ta\tip\ttcp\tb\tip")

    def test_window_parse(self):
        assert parse_window("inf") == math.inf
        assert parse_window("50") == 50

    def test_format_line(self):
        e = StreamEdge(7, "a", "ip", "tcp", "b", "ip", {})
        assert format_stream_line(e) == "7\ta\tip\ttcp\tb\tip"


edge_ops = st.lists(
    st.tuples(st.integers(0, 6), st.integers(0, 6), st.sampled_from("xyz"), st.integers(0, 3)),
    max_size=60)


class TestInvariants:
    @given(edge_ops, st.sampled_from([0, 2, 5, math.inf]))
    def test_window_and_adjacency(self, ops, window):
        g = DynamicGraph(window)
        t = 0
        last = None
        for s, d, label, dt in ops:
            t += dt
            g.add_edge(f"n{s}", f"n{d}", label, t)
            assert last is None or g.t_last >= last
            last = g.t_last
            for e in g.edges.values():
                assert g.t_last - e.timestamp <= window
            out_total = sum(g.degree(v, OUT) for v in g.vertices)
            assert out_total == g.edge_count == sum(g.degree(v, IN) for v in g.vertices)
            for e in g.edges.values():
                assert e in g.neighbors(e.src, OUT, e.label)
                assert e in g.neighbors(e.dst, IN, e.label)
            for v in g.vertices:
                assert g.degree(v, BOTH) > 0
