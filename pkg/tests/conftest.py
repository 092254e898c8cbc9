import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from circform.formation import FormationSpec  # noqa: E402
from circform.graph import FormationGraph  # noqa: E402
from circform.paths import Circle  # noqa: E402


@pytest.fixture
def path_graph():
    return FormationGraph(3, ((1, 2), (2, 3)))


@pytest.fixture
def flight_spec(path_graph):
    return FormationSpec(path_graph, (0.0, 0.0), 8.0, 80.0)


@pytest.fixture
def circle80():
    return Circle(radius=80.0)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
