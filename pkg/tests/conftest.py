"""Acceptance-criterion bookkeeping: one PASS/FAIL line per criterion after the run."""
from __future__ import annotations

_criteria: dict[str, tuple[int, str]] = {}
_outcomes: dict[int, list[bool]] = {}
_titles: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by this test")


def pytest_collection_modifyitems(session, config, items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            number, title = mark.args
            _criteria[item.nodeid] = (number, title)
            _titles[number] = title


def pytest_runtest_logreport(report):
    entry = _criteria.get(report.nodeid)
    if entry is None:
        return
    if report.when == "call" or report.failed:
        _outcomes.setdefault(entry[0], []).append(report.passed and not report.failed)


def pytest_terminal_summary(terminalreporter):
    if not _titles:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_titles):
        results = _outcomes.get(number)
        if not results:
            status = "NOT RUN"
        else:
            status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status:<7} {_titles[number]}")
