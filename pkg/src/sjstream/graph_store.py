"""Windowed in-memory store for a directed, labeled, multi-edge graph stream.

Edges arrive in timestamp order.  After every insertion, edges whose timestamp
is strictly below ``t_last - window`` are evicted, and vertices left without a
live edge disappear from the adjacency structure.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, NamedTuple, Optional

IN = "in"
OUT = "out"
BOTH = "both"

INFINITE_WINDOW = math.inf


class OutOfOrderError(ValueError):
    """Raised when an edge arrives with a timestamp older than the newest one."""


@dataclass(slots=True)
class VertexRecord:
    id: int
    name: str
    label: str
    out_degree: int = 0
    in_degree: int = 0


@dataclass(slots=True, eq=False)
class EdgeRecord:
    id: int
    src: int
    dst: int
    label: str
    timestamp: int
    attributes: dict = field(default_factory=dict)
    src_label: str = ""
    dst_label: str = ""

    def __repr__(self):
        return (f"EdgeRecord({self.id}: {self.src}-[{self.label}]->{self.dst} "
                f"@{self.timestamp})")


class StreamEdge(NamedTuple):
    """One parsed line of an edge stream file, before vertex ids are interned."""
    timestamp: int
    src: str
    src_label: str
    label: str
    dst: str
    dst_label: str
    attributes: dict


class DynamicGraph:
    """Sliding-window multigraph.

    Adjacency is kept per vertex, split by direction and then by edge label,
    with edges keyed by id so removal is O(1) and iteration order is the
    insertion order.
    """

    def __init__(self, window: float = INFINITE_WINDOW):
        if window < 0:
            raise ValueError("window must be non-negative")
        self.window = window
        self.t_last: Optional[int] = None
        self.edges: dict[int, EdgeRecord] = {}
        self.vertices: dict[int, VertexRecord] = {}
        self._out: dict[int, dict[str, dict[int, EdgeRecord]]] = {}
        self._in: dict[int, dict[str, dict[int, EdgeRecord]]] = {}
        self._ids: dict[str, int] = {}
        self._names: list[str] = []
        self._queue: deque[EdgeRecord] = deque()
        self._next_edge_id = 0
        self.vertex_removed_listeners: list[Callable[[int], None]] = []

    # -- identity ---------------------------------------------------------

    def intern(self, name: str) -> int:
        """Map an external vertex id to its dense internal id (stable per run)."""
        vid = self._ids.get(name)
        if vid is None:
            vid = len(self._names)
            self._ids[name] = vid
            self._names.append(name)
        return vid

    def vertex_name(self, vid: int) -> str:
        return self._names[vid]

    def vertex_id(self, name: str) -> Optional[int]:
        return self._ids.get(name)

    # -- mutation ---------------------------------------------------------

    def add_edge(self, src: str, dst: str, label: str, timestamp: int,
                 src_label: str = "", dst_label: str = "",
                 attributes: Optional[dict] = None) -> int:
        """Insert one edge and evict whatever fell out of the window.

        Returns the new edge id.  Raises OutOfOrderError if ``timestamp`` is
        older than the newest edge seen so far.
        """
        if timestamp < 0:
            raise ValueError(f"negative timestamp {timestamp}")
        if self.t_last is not None and timestamp < self.t_last:
            raise OutOfOrderError(
                f"timestamp {timestamp} arrives after {self.t_last}")
        s = self._touch_vertex(src, src_label)
        d = self._touch_vertex(dst, dst_label)
        eid = self._next_edge_id
        self._next_edge_id += 1
        edge = EdgeRecord(eid, s.id, d.id, label, timestamp,
                          attributes if attributes is not None else {},
                          s.label, d.label)
        self.edges[eid] = edge
        self._out[s.id].setdefault(label, {})[eid] = edge
        self._in[d.id].setdefault(label, {})[eid] = edge
        s.out_degree += 1
        d.in_degree += 1
        self._queue.append(edge)
        self.t_last = timestamp
        self.evict_expired()
        return eid

    def add(self, item: StreamEdge) -> int:
        return self.add_edge(item.src, item.dst, item.label, item.timestamp,
                             item.src_label, item.dst_label, item.attributes)

    def _touch_vertex(self, name: str, label: str) -> VertexRecord:
        vid = self.intern(name)
        rec = self.vertices.get(vid)
        if rec is None:
            rec = VertexRecord(vid, name, label)
            self.vertices[vid] = rec
            self._out[vid] = {}
            self._in[vid] = {}
        elif label and rec.label != label:
            raise ValueError(
                f"vertex {name!r} relabeled from {rec.label!r} to {label!r}")
        return rec

    def evict_expired(self) -> int:
        """Remove every live edge older than ``t_last - window``."""
        if self.t_last is None:
            return 0
        horizon = self.t_last - self.window
        removed = 0
        queue = self._queue
        while queue and queue[0].timestamp < horizon:
            self._remove(queue.popleft())
            removed += 1
        return removed

    def _remove(self, edge: EdgeRecord) -> None:
        del self.edges[edge.id]
        for adj, vid in ((self._out, edge.src), (self._in, edge.dst)):
            bucket = adj[vid][edge.label]
            del bucket[edge.id]
            if not bucket:
                del adj[vid][edge.label]
        s = self.vertices[edge.src]
        d = self.vertices[edge.dst]
        s.out_degree -= 1
        d.in_degree -= 1
        self._drop_if_isolated(s)
        if d is not s:
            self._drop_if_isolated(d)

    def _drop_if_isolated(self, rec: VertexRecord) -> None:
        if rec.out_degree or rec.in_degree:
            return
        del self.vertices[rec.id]
        del self._out[rec.id]
        del self._in[rec.id]
        for listener in self.vertex_removed_listeners:
            listener(rec.id)

    # -- queries ----------------------------------------------------------

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def has_vertex(self, vid: int) -> bool:
        return vid in self.vertices

    def vertex_label(self, vid: int) -> str:
        return self.vertices[vid].label

    def edge(self, eid: int) -> EdgeRecord:
        return self.edges[eid]

    def is_live(self, eid: int) -> bool:
        return eid in self.edges

    def degree(self, vid: int, direction: str = BOTH) -> int:
        rec = self.vertices.get(vid)
        if rec is None:
            return 0
        if direction == OUT:
            return rec.out_degree
        if direction == IN:
            return rec.in_degree
        return rec.out_degree + rec.in_degree

    def neighbors(self, vid: int, direction: str = BOTH,
                  label: Optional[str] = None) -> list[EdgeRecord]:
        """Live edges incident to ``vid``, optionally filtered by direction and label.

        A self-loop shows up once per direction when ``direction`` is both.
        Unknown vertices yield an empty list.
        """
        if vid not in self.vertices:
            return []
        sides = (self._out, self._in) if direction == BOTH else (
            (self._out,) if direction == OUT else (self._in,))
        result: list[EdgeRecord] = []
        for adj in sides:
            by_label = adj[vid]
            if label is None:
                for bucket in by_label.values():
                    result.extend(bucket.values())
            else:
                bucket = by_label.get(label)
                if bucket:
                    result.extend(bucket.values())
        return result

    def iter_adjacent(self, vid: int, direction: str,
                      label: Optional[str] = None) -> Iterable[EdgeRecord]:
        """Like ``neighbors`` for a single direction, without copying."""
        adj = self._out if direction == OUT else self._in
        by_label = adj.get(vid)
        if not by_label:
            return ()
        if label is not None:
            bucket = by_label.get(label)
            return bucket.values() if bucket else ()
        return (e for bucket in by_label.values() for e in bucket.values())

    def out_labels(self, vid: int) -> dict[str, dict[int, EdgeRecord]]:
        return self._out.get(vid, {})

    def in_labels(self, vid: int) -> dict[str, dict[int, EdgeRecord]]:
        return self._in.get(vid, {})


# -- stream file format -----------------------------------------------------

def parse_attributes(text: str) -> dict:
    attrs = {}
    if not text:
        return attrs
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        key, sep, value = part.partition("=")
        if not sep:
            raise ValueError(f"bad attribute {part!r}, expected k=v")
        attrs[key.strip()] = value.strip()
    return attrs


def format_attributes(attrs: dict) -> str:
    return ";".join(f"{k}={v}" for k, v in attrs.items())


def parse_stream_line(line: str, lineno: int = 0) -> Optional[StreamEdge]:
    line = line.rstrip("\r\n")
    if not line.strip() or line.startswith("#"):
        return None
    cols = line.split("\t")
    if len(cols) not in (6, 7):
        raise ValueError(f"line {lineno}: expected 6 or 7 tab-separated "
                         f"columns, got {len(cols)}")
    try:
        ts = int(cols[0])
    except ValueError:
        raise ValueError(f"line {lineno}: bad timestamp {cols[0]!r}") from None
    if ts < 0:
        raise ValueError(f"line {lineno}: negative timestamp {ts}")
    attrs = parse_attributes(cols[6]) if len(cols) == 7 else {}
    return StreamEdge(ts, cols[1], cols[2], cols[3], cols[4], cols[5], attrs)


def read_stream(lines: Iterable[str]) -> Iterator[StreamEdge]:
    for lineno, line in enumerate(lines, 1):
        item = parse_stream_line(line, lineno)
        if item is not None:
            yield item


def load_stream(path) -> list[StreamEdge]:
    with open(path, encoding="utf-8") as fh:
        return list(read_stream(fh))


def format_stream_line(e: StreamEdge) -> str:
    cols = [str(e.timestamp), e.src, e.src_label, e.label, e.dst, e.dst_label]
    if e.attributes:
        cols.append(format_attributes(e.attributes))
    return "\t".join(cols)


def write_stream(path, edges: Iterable[StreamEdge]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in edges:
            fh.write(format_stream_line(e))
            fh.write("\n")


def parse_window(text) -> float:
    text = str(text).strip().lower()
    if text in ("inf", "infinity", "none", "-"):
        return INFINITE_WINDOW
    value = float(text)
    return int(value) if value.is_integer() else value
