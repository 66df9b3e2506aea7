import csv
import io

import pytest

from sjstream import load_pattern
from sjstream.bench import BENCH_HEADER, ORACLE, CellResult, CorrectnessAlarm, bench, summarize
from sjstream.cli import EXIT_ALARM, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from sjstream.decomposer import ALL_STRATEGIES
from sjstream.engine import Engine
from sjstream.graph_store import StreamEdge, write_stream
from sjstream.query_model import QueryGraph, write_query
from sjstream.workload import StreamSpec, generate_stream


def small_stream():
    edges = [("a", "x", "b"), ("b", "y", "c"), ("c", "z", "d"), ("b", "y", "e"),
             ("q", "x", "b"), ("e", "z", "f"), ("a", "x", "g")]
    return [StreamEdge(t, s, "ip", lab, d, "ip", {}) for t, (s, lab, d) in enumerate(edges)]


@pytest.fixture
def files(tmp_path):
    stream = tmp_path / "s.tsv"
    write_stream(stream, small_stream())
    query = tmp_path / "q.qg"
    write_query(query, QueryGraph.from_edges([("1", "x", "2"), ("2", "y", "3"), ("3", "z", "4")],
                                            window=100, group="path-3"))
    return tmp_path, stream, query


def break_backsearch(monkeypatch):
    monkeypatch.setattr(Engine, "_enable", lambda self, leaf, partial: None)


class TestEndToEnd:
    def test_pipeline(self, files, capsys):
        d, stream, query = files
        stats = d / "stats.csv"
        assert main(["stats", "--stream", str(stream), "--all", "-o", str(stats)]) == EXIT_OK
        assert stats.read_text().splitlines()[1] == "kind,key,count,selectivity"

        tree = d / "tree.txt"
        assert main(["decompose", "--query", str(query), "--stats", str(stats),
                     "-o", str(tree)]) == EXIT_OK
        summary = capsys.readouterr().out
        assert "expected_selectivity=" in summary and "chosen=" in summary

        out = d / "matches.tsv"
        metrics = d / "metrics.csv"
        assert main(["run", "--stream", str(stream), "--query", str(query), "--tree", str(tree),
                     "--out", str(out), "--metrics", str(metrics)]) == EXIT_OK
        lines = out.read_text().splitlines()
        assert len(lines) == 4  # {a,q} -> b -> {c -> d, e -> f}
        assert lines[0] == "2\t0=0,1=1,2=2"
        row = next(csv.DictReader(metrics.open()))
        assert row["matches_emitted"] == "4" and row["edges"] == "7"

        assert main(["check", "--stream", str(stream), "--query", str(query),
                     "--tree", str(tree)]) == EXIT_OK
        assert capsys.readouterr().out.startswith("PASS")

    def test_run_from_stdin(self, files, capsys, monkeypatch):
        _, stream, query = files
        monkeypatch.setattr("sys.stdin", io.StringIO(stream.read_text()))
        assert main(["run", "--stream", "-", "--query", str(query), "--mode", "eager"]) == EXIT_OK
        assert len(capsys.readouterr().out.splitlines()) == 4

    def test_window_override(self, files, capsys):
        _, stream, query = files
        assert main(["run", "--stream", str(stream), "--query", str(query),
                     "--window", "1"]) == EXIT_OK
        assert capsys.readouterr().out == ""

    def test_generators(self, tmp_path, capsys):
        spec = tmp_path / "spec.txt"
        spec.write_text("vertices=60\nedges=3000\nseed=2\n")
        stream = tmp_path / "gen.tsv"
        assert main(["gen-stream", "--spec", str(spec), "-o", str(stream)]) == EXIT_OK
        again = tmp_path / "gen2.tsv"
        assert main(["gen-stream", "--spec", str(spec), "-o", str(again)]) == EXIT_OK
        assert stream.read_bytes() == again.read_bytes()
        stats = tmp_path / "stats.csv"
        assert main(["stats", "--stream", str(stream), "--all", "-o", str(stats)]) == EXIT_OK
        qdir = tmp_path / "queries"
        assert main(["gen-queries", "--stats", str(stats), "--size", "3", "-n", "4",
                     "--pool", "30", "--window", "500", "-o", str(qdir)]) == EXIT_OK
        made = sorted(p.name for p in qdir.iterdir())
        assert made and made[0] == "path-3-000.qg"
        out = tmp_path / "bench.csv"
        assert main(["bench", "--stream", str(stream), "--queries", str(qdir),
                     "--stats", str(stats), "--oracle-mode", "full", "-o", str(out)]) == EXIT_OK
        rows = [r for r in out.read_text().splitlines() if not r.startswith("#")]
        assert rows[0].split(",") == BENCH_HEADER
        names = {r.split(",")[1] for r in rows[1:]}
        assert names == {s.name for s in ALL_STRATEGIES} | {ORACLE}


class TestExitCodes:
    def test_unknown_flag(self, files):
        _, stream, query = files
        with pytest.raises(SystemExit) as exc:
            main(["run", "--stream", str(stream), "--query", str(query), "--bogus"])
        assert exc.value.code == EXIT_USAGE

    def test_missing_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == EXIT_USAGE

    def test_missing_file(self, tmp_path, capsys):
        code = main(["stats", "--stream", str(tmp_path / "nope.tsv"), "-o", str(tmp_path / "o")])
        assert code == EXIT_IO
        assert "error" in capsys.readouterr().err

    def test_malformed_stream(self, tmp_path, files):
        _, _, query = files
        bad = tmp_path / "bad.tsv"
        bad.write_text("0\ta\tip\ttcp\n")
        assert main(["run", "--stream", str(bad), "--query", str(query)]) == EXIT_IO

    def test_malformed_tree(self, tmp_path, files):
        _, stream, query = files
        tree = tmp_path / "t.txt"
        tree.write_text("node 0 nonsense\n")
        assert main(["run", "--stream", str(stream), "--query", str(query),
                     "--tree", str(tree)]) == EXIT_IO

    def test_check_divergence(self, files, monkeypatch, capsys):
        # reversed arrival order forces the lazy engine to rely on back-search
        d, _, query = files
        stream = d / "rev.tsv"
        edges = [StreamEdge(0, "c", "ip", "z", "d", "ip", {}),
                 StreamEdge(1, "b", "ip", "y", "c", "ip", {}),
                 StreamEdge(2, "a", "ip", "x", "b", "ip", {})]
        write_stream(stream, edges)
        break_backsearch(monkeypatch)
        assert main(["check", "--stream", str(stream), "--query", str(query)]) == EXIT_ALARM
        assert "missing" in capsys.readouterr().err

    def test_bench_alarm(self, files, monkeypatch, tmp_path):
        d, _, query = files
        stream = d / "rev.tsv"
        write_stream(stream, [StreamEdge(0, "b", "ip", "y", "c", "ip", {}),
                              StreamEdge(1, "c", "ip", "z", "d", "ip", {}),
                              StreamEdge(2, "a", "ip", "x", "b", "ip", {})])
        break_backsearch(monkeypatch)
        assert main(["bench", "--stream", str(stream), "--queries", str(query),
                     "--strategies", "Single,SingleLazy", "--no-oracle"]) == EXIT_ALARM


class TestBench:
    def test_speedup_definition(self):
        cells = [CellResult("g", "q0", ORACLE, 10.0, 3), CellResult("g", "q1", ORACLE, 30.0, 3),
                 CellResult("g", "q0", "Path", 1.0, 3), CellResult("g", "q1", "Path", 4.0, 3)]
        rows = {r.strategy: r for r in summarize(cells)}
        assert rows["Path"].mean_runtime == 2.5
        assert rows["Path"].speedup_vs_oracle == 20.0 / 2.5
        assert rows[ORACLE].speedup_vs_oracle == 1.0

    def test_strategies_agree_on_generated(self):
        stream = generate_stream(StreamSpec(vertices=80, edges=3000, seed=3))
        q = QueryGraph.from_edges([("1", "tcp", "2"), ("2", "udp", "3")], window=200,
                                  group="path-2")
        report = bench(stream, [q])
        counts = {c.matches for c in report.cells}
        assert len(counts) == 1
        assert any("warm-up" in n for n in report.notes)

    def test_prefix_extrapolation(self):
        stream = generate_stream(StreamSpec(vertices=80, edges=2000, seed=3))
        q = load_pattern("dos_parallel")
        report = bench(stream, [q], oracle_prefix=500)
        oracle = [c for c in report.cells if c.strategy == ORACLE][0]
        assert oracle.extrapolated
        assert any("extrapolated" in n for n in report.notes)

    def test_alarm_on_disagreement(self, monkeypatch):
        break_backsearch(monkeypatch)
        stream = [StreamEdge(0, "v", "ip", "y", "w", "ip", {}),
                  StreamEdge(1, "u", "ip", "x", "v", "ip", {})]
        q = QueryGraph.from_edges([("a", "x", "b"), ("b", "y", "c")])
        with pytest.raises(CorrectnessAlarm):
            bench(stream, [q])
