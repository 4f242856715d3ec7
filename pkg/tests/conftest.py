import numpy as np
import pytest
from hypothesis import strategies as st

from tada.graph import Graph

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    number, title = marker.args
    detail = dict(item.user_properties).get("detail", "")
    _criteria[number] = (title, report.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, passed, detail = _criteria[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:>2} [{status}] {title}  {detail}")


# ---------------------------------------------------------------- shared graphs

def triangle():
    return Graph.from_edges(3, [0, 1, 2], [1, 2, 0])


def path(n):
    return Graph.from_edges(n, np.arange(n - 1), np.arange(1, n))


def star(leaves):
    return Graph.from_edges(leaves + 1, np.zeros(leaves, dtype=int), np.arange(1, leaves + 1))


def complete(n):
    return Graph.from_dense(np.ones((n, n)) - np.eye(n))


def cycle(n):
    return Graph.from_edges(n, np.arange(n), (np.arange(n) + 1) % n)


@st.composite
def graphs(draw, min_nodes=2, max_nodes=30, min_degree=0):
    """Random simple graphs; with ``min_degree=1`` every node gets a neighbour."""
    n = draw(st.integers(min_nodes, max_nodes))
    pairs = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)),
                          max_size=4 * n))
    u = [a for a, _ in pairs]
    v = [b for _, b in pairs]
    if min_degree:
        # a ring guarantees degree >= 2 for n >= 3 and degree 1 for n == 2
        u += list(range(n))
        v += [(i + 1) % n for i in range(n)]
    return Graph.from_edges(n, u, v)
