import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nlsgraph import closed_forms as cf  # noqa: E402
from nlsgraph.function_space import GridSpec  # noqa: E402


@pytest.fixture(scope="session")
def s4():
    return cf.soliton_constants(4.0)


@pytest.fixture(scope="session")
def coarse_grid():
    """Cheap grid for property sweeps that do not need solver accuracy."""
    return GridSpec(0.01, 10.0)


@pytest.fixture(scope="session")
def gallery_decisions(s4):
    """Existence decision at mass 1 for every gallery graph (default solver)."""
    from nlsgraph import graph_model as gm
    from nlsgraph.phase_scan import decide_existence

    return {name: decide_existence(g, 1.0, s4) for name, g in gm.gallery().items()}


_CRITERIA: dict[int, tuple[str, list[str]]] = {}


def pytest_runtest_logreport(report):
    """Collect per-criterion outcomes from tests carrying the ``criterion`` marker."""
    mark = getattr(report, "criterion", None)
    if mark is None or (report.when != "call" and report.passed):
        return
    number, title = mark
    _CRITERIA.setdefault(number, (title, []))[1].append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        outcome.get_result().criterion = tuple(mark.args)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcomes = _CRITERIA[number]
        verdict = "PASS" if outcomes and all(o == "passed" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {verdict}  {title}")
