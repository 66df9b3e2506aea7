"""Four-way strategy comparison against the per-edge oracle."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .decomposer import (
    ALL_STRATEGIES, DEFAULT_THRESHOLD, Strategy, select_strategy, tree_for,
)
from .engine import collect
from .oracle import ANCHORED, run_oracle
from .query_model import QueryGraph
from .selectivity import (
    LABEL_ONLY, MapConfig, SelectivityTable, UndefinedSelectivity,
    estimate_table, warmup_length,
)

log = logging.getLogger(__name__)

BENCH_HEADER = ["group", "strategy", "mean_runtime", "matches", "iso_fraction",
                "speedup_vs_oracle"]
ORACLE = "Oracle"


class CorrectnessAlarm(RuntimeError):
    """Strategies (or the oracle) disagree about the match set."""


@dataclass
class CellResult:
    group: str
    query: str
    strategy: str
    runtime: float
    matches: int
    iso_fraction: float = 0.0
    update_fraction: float = 0.0
    edges_per_sec: float = 0.0
    peak_table_entries: int = 0
    relative_selectivity: Optional[float] = None
    extrapolated: bool = False


@dataclass
class BenchRow:
    group: str
    strategy: str
    mean_runtime: float
    matches: int
    iso_fraction: float
    speedup_vs_oracle: Optional[float]

    def as_list(self) -> list:
        speed = "" if self.speedup_vs_oracle is None else f"{self.speedup_vs_oracle:.3f}"
        return [self.group, self.strategy, f"{self.mean_runtime:.6f}", self.matches,
                f"{self.iso_fraction:.4f}", speed]


@dataclass
class RunReport:
    cells: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def row(self, group: str, strategy: str) -> Optional[BenchRow]:
        for r in self.rows:
            if r.group == group and r.strategy == strategy:
                return r
        return None

    def to_csv(self) -> str:
        buf = io.StringIO()
        for note in self.notes:
            buf.write(f"# {note}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(BENCH_HEADER)
        for r in self.rows:
            writer.writerow(r.as_list())
        return buf.getvalue()


def _relative(query, table, cfg, threshold) -> Optional[float]:
    try:
        return select_strategy(query, table, threshold, cfg).relative
    except (UndefinedSelectivity, ValueError):
        return None


def bench(stream: Sequence, queries: Sequence[QueryGraph],
          strategies: Sequence[Strategy] = ALL_STRATEGIES,
          window: Optional[float] = None,
          table: Optional[SelectivityTable] = None,
          cfg: MapConfig = LABEL_ONLY,
          threshold: float = DEFAULT_THRESHOLD,
          oracle: bool = True,
          oracle_prefix: Optional[int] = None,
          oracle_mode: str = ANCHORED,
          names: Optional[Sequence[str]] = None) -> RunReport:
    """Run every (query, strategy) cell plus the oracle; average per query group.

    With ``oracle_prefix`` shorter than the stream, the oracle runs on that
    prefix only and its runtime is scaled linearly to the full length.
    """
    stream = list(stream)
    report = RunReport()
    if table is None:
        n = warmup_length(len(stream))
        table = estimate_table(stream[:n], cfg)
        report.notes.append(f"selectivity estimated from a {n}-edge warm-up prefix")
    names = list(names) if names is not None else [f"q{i}" for i in range(len(queries))]
    prefix = len(stream) if oracle_prefix is None else min(oracle_prefix, len(stream))
    if oracle and prefix < len(stream):
        report.notes.append(f"oracle runtime extrapolated linearly from a {prefix}-edge "
                            f"prefix to {len(stream)} edges; its matches column counts "
                            "the prefix only")
    if oracle:
        report.notes.append(f"oracle mode: {oracle_mode}")
    for name, query in zip(names, queries):
        group = query.group or "default"
        w = query.window if window is None else window
        rel = _relative(query, table, cfg, threshold)
        reference = None
        for strategy in strategies:
            tree, resolved = tree_for(strategy, query, table, cfg, threshold)
            start = time.perf_counter()
            events, eng = collect(tree, stream, resolved, w)
            elapsed = time.perf_counter() - start
            sigs = {ev.match.signature for ev in events}
            if reference is None:
                reference = (strategy.name, sigs)
            elif sigs != reference[1]:
                raise CorrectnessAlarm(
                    f"query {name}: {strategy.name} found {len(sigs)} matches, "
                    f"{reference[0]} found {len(reference[1])}")
            m = eng.metrics
            report.cells.append(CellResult(
                group, name, strategy.name, elapsed, len(sigs), m.iso_fraction,
                m.update_fraction, m.edges_per_sec, m.peak_table_entries, rel))
        if oracle:
            result = run_oracle(stream[:prefix], query, w, mode=oracle_mode)
            runtime = result.runtime
            if prefix < len(stream):
                runtime *= len(stream) / max(prefix, 1)
            elif reference is not None and result.cumulative != reference[1]:
                raise CorrectnessAlarm(
                    f"query {name}: oracle found {result.total} matches, "
                    f"{reference[0]} found {len(reference[1])}")
            report.cells.append(CellResult(group, name, ORACLE, runtime, result.total,
                                           extrapolated=prefix < len(stream)))
    report.rows = summarize(report.cells)
    return report


def summarize(cells: Sequence[CellResult]) -> list:
    groups: dict = {}
    for c in cells:
        groups.setdefault(c.group, {}).setdefault(c.strategy, []).append(c)
    rows = []
    for group, by_strategy in groups.items():
        oracle_cells = by_strategy.get(ORACLE)
        oracle_mean = (sum(c.runtime for c in oracle_cells) / len(oracle_cells)
                       if oracle_cells else None)
        for strategy, cs in by_strategy.items():
            mean = sum(c.runtime for c in cs) / len(cs)
            iso = sum(c.iso_fraction for c in cs) / len(cs)
            speed = oracle_mean / mean if oracle_mean is not None and mean > 0 else None
            rows.append(BenchRow(group, strategy, mean, sum(c.matches for c in cs), iso, speed))
    return rows
