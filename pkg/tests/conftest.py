import random

import pytest
from hypothesis import HealthCheck, settings

from sjstream.graph_store import StreamEdge
from sjstream.query_model import QueryGraph

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

LABELS = "abcdefgh"


def random_stream(rng: random.Random, n_edges: int, n_vertices: int, labels,
                  stride: int = 1, vertex_labels=("ip",)) -> list:
    vlabel = {v: rng.choice(vertex_labels) for v in range(n_vertices)}
    out = []
    ts = 0
    for _ in range(n_edges):
        a = rng.randrange(n_vertices)
        b = rng.randrange(n_vertices)
        out.append(StreamEdge(ts, f"v{a}", vlabel[a], rng.choice(labels),
                              f"v{b}", vlabel[b], {}))
        ts += stride if stride else rng.randint(0, 2)
    return out


def random_tree_query(rng: random.Random, n_edges: int, labels, window=float("inf"),
                      shape: str = "tree") -> QueryGraph:
    """Random path (directed chain) or tree with mixed edge directions."""
    triples = []
    for child in range(1, n_edges + 1):
        parent = child - 1 if shape == "path" else rng.randrange(child)
        if shape == "path" or rng.random() < 0.5:
            triples.append((parent, rng.choice(labels), child))
        else:
            triples.append((child, rng.choice(labels), parent))
    return QueryGraph.from_edges(triples, window=window, group=f"{shape}-{n_edges}")


@pytest.fixture
def rng():
    return random.Random(1234)


# -- acceptance summary --------------------------------------------------------

ACCEPTANCE: dict = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (passed, detail)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
