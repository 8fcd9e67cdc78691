import json
from pathlib import Path

import pytest

from benchgate.callgraph import APPLICATION, MICROBENCHMARK, CallGraph

FIXTURES = Path(__file__).parent / "fixtures"


def app_graph(nodes, graph_id="app", edges=()):
    return CallGraph(APPLICATION, graph_id, dict(nodes), frozenset(edges))


def micro_graph(graph_id, nodes):
    if not isinstance(nodes, dict):
        nodes = {fn: 1.0 for fn in nodes}
    return CallGraph(MICROBENCHMARK, graph_id, nodes)


def counted_app(total, prefix="f"):
    return app_graph({f"{prefix}{i:04d}": 1.0 for i in range(total)})


@pytest.fixture
def toy_suite():
    """Ten application functions; MB1 and MB3 together cover eight of them.

    MB1's covered functions sum to 10 s, MB3's to 15 s. MB2 is a subset of MB1
    and MB4 touches only non-application code.
    """
    app = app_graph({"a": 1, "b": 1, "c": 2, "d": 2, "e": 2, "f": 2, "g": 5, "h": 6, "i": 3, "j": 4})
    micros = [
        micro_graph("MB1", ["a", "b", "c", "d", "e", "f", "testing.Run"]),
        micro_graph("MB2", ["a", "b", "testing.Run"]),
        micro_graph("MB3", ["e", "f", "g", "h"]),
        micro_graph("MB4", ["x", "y", "testing.Run"]),
    ]
    return app, micros


@pytest.fixture
def write_json(tmp_path):
    def _write(name, doc):
        path = tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(doc))
        return path
    return _write


def pytest_terminal_summary(terminalreporter):
    outcomes = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            name = rep.nodeid.split("::")[-1]
            if "test_criterion_" not in name or rep.when not in ("call", "setup"):
                continue
            number = int(name.split("_")[2])
            ok = status == "passed"
            outcomes[number] = outcomes.get(number, True) and ok
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(outcomes):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if outcomes[number] else 'FAIL'}")
