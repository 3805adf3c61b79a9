import pytest

from streetrow.netmodel import DirectedEdge, Node, StreetNetwork, load_network


def two_way(pairs, length=100.0, width=15.0, faci=0.1, tags=()):
    """Network with a bidirectional edge pair per node pair."""
    node_ids = sorted({n for p in pairs for n in p})
    edges = []
    for a, b in pairs:
        for u, v in ((a, b), (b, a)):
            edges.append(DirectedEdge(f"e{u}_{v}", f"n{u}", f"n{v}", length, width, faci,
                                      tags=frozenset(tags)))
    return StreetNetwork(tuple(Node(f"n{i}") for i in node_ids), tuple(edges), "test")


def grid_pairs(rows, cols):
    pairs = []
    for r in range(rows):
        for c in range(cols):
            k = r * cols + c + 1
            if c + 1 < cols:
                pairs.append((k, k + 1))
            if r + 1 < rows:
                pairs.append((k, k + cols))
    return pairs


@pytest.fixture(scope="session")
def grid4():
    return load_network("grid4")


@pytest.fixture(scope="session")
def k12():
    return load_network("kensington12")


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per criterion; all lines are repeated in the summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append(line)
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
