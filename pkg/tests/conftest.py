"""Shared fixtures: scenario runs are expensive, so each configuration runs once per session."""

import warnings

import pytest

from bohmlab.scenarios import default_config, run_scenario

warnings.filterwarnings("ignore", message=".*TBB.*")

_RUNS = {}


def scenario_run(scenario, **changes):
    """Run ``scenario`` with ``changes`` applied to its defaults; memoized per session."""
    key = (scenario, tuple(sorted(changes.items())))
    if key not in _RUNS:
        _RUNS[key] = run_scenario(default_config(scenario).updated(**changes))
    return _RUNS[key]


@pytest.fixture(scope="session")
def run_cache():
    return scenario_run


# acceptance criteria: measured values noted by each test, outcome taken from the test report
_NOTES = {}
_OUTCOMES = {}
_CRITERION_PREFIX = "test_acceptance.py::test_criterion_"


def _criterion(nodeid):
    name = nodeid.split(_CRITERION_PREFIX, 1)[1]
    return int(name.split("_", 1)[0]), name.split("_", 1)[1]


@pytest.fixture
def note(request):
    """Record the measured values behind an acceptance verdict."""

    def record(text):
        _NOTES[request.node.nodeid] = text
        print(text)

    return record


def pytest_runtest_logreport(report):
    if _CRITERION_PREFIX not in report.nodeid:
        return
    if report.when == "call" or report.failed:
        previous = _OUTCOMES.get(report.nodeid)
        if previous != "FAIL":
            _OUTCOMES[report.nodeid] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for nodeid in sorted(_OUTCOMES, key=_criterion):
        number, name = _criterion(nodeid)
        detail = _NOTES.get(nodeid, "no measurement recorded")
        terminalreporter.write_line(f"criterion {number:2d} {_OUTCOMES[nodeid]}  {name}: {detail}")
