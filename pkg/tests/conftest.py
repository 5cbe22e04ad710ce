import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from graphtax.graph import Dataset, Graph, TaskKind  # noqa: E402


def make_graph(n, edges=(), features=None, label=None, node_labels=None):
    if features is None:
        features = np.ones((n, 1))
    return Graph(n=n, edges=np.array(list(edges), dtype=np.int64).reshape(-1, 2),
                 features=features, graph_label=label, node_labels=node_labels)


def path(n, **kw):
    return make_graph(n, [(i, i + 1) for i in range(n - 1)], **kw)


def cycle(n, **kw):
    return make_graph(n, [(i, (i + 1) % n) for i in range(n)], **kw)


def complete(n, **kw):
    return make_graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)], **kw)


def random_graph(rng, n, p=None, dim=2, label=None):
    p = rng.uniform(0.1, 0.7) if p is None else p
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return make_graph(n, edges, features=rng.normal(size=(n, dim)), label=label)


def graph_dataset(graphs, num_classes=2, name="toy"):
    return Dataset(name, list(graphs), TaskKind.GRAPH, num_classes)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


TOY_DIR = Path(__file__).parent / "fixtures" / "toy"


# -- acceptance reporting ---------------------------------------------------
# Tests marked ``criterion(n, title)`` get one PASS/FAIL line each in the
# terminal summary, followed by whatever measurements they noted.

ACCEPTANCE: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def note(request):
    marker = request.node.get_closest_marker("criterion")
    key = marker.args[0] if marker else request.node.name

    def add(text):
        ACCEPTANCE.setdefault(key, {}).setdefault("notes", []).append(str(text))

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    entry = ACCEPTANCE.setdefault(marker.args[0], {})
    entry["title"] = marker.args[1]
    if report.when == "call" or (report.when == "setup" and not report.passed):
        entry["status"] = "PASS" if report.passed else "SKIP" if report.skipped else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (not isinstance(k, int), k if isinstance(k, int) else 0, str(k))):
        entry = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {entry.get('status', 'FAIL')}  {entry.get('title', '')}")
        for text in entry.get("notes", []):
            terminalreporter.write_line(f"              {text}")
