"""Continuous subgraph queries over windowed edge streams with selectivity-ordered join trees."""

from importlib import resources

from .graph_store import DynamicGraph, StreamEdge, load_stream, write_stream
from .query_model import Match, QueryGraph, load_query, parse_query
from .sjtree import SJTree
from .selectivity import MapConfig, SelectivityTable, estimate_table
from .decomposer import Strategy, select_strategy, tree_for
from .engine import Engine, EngineConfig, MatchEvent, collect
from .oracle import incremental_diff_check, run_oracle

__version__ = "0.1.0"


def pattern_names() -> list:
    """Names of the bundled attack-pattern queries."""
    root = resources.files(__package__) / "patterns"
    return sorted(p.name[:-3] for p in root.iterdir() if p.name.endswith(".qg"))


def load_pattern(name: str) -> QueryGraph:
    text = (resources.files(__package__) / "patterns" / f"{name}.qg").read_text("utf-8")
    return parse_query(text.splitlines())


__all__ = [
    "DynamicGraph", "StreamEdge", "load_stream", "write_stream",
    "Match", "QueryGraph", "load_query", "parse_query", "SJTree",
    "MapConfig", "SelectivityTable", "estimate_table",
    "Strategy", "select_strategy", "tree_for",
    "Engine", "EngineConfig", "MatchEvent", "collect",
    "incremental_diff_check", "run_oracle", "pattern_names", "load_pattern",
]
