"""Acceptance bookkeeping.

Tests marked ``@pytest.mark.criterion(number, title, budget_s)`` are grouped
per criterion.  A criterion passes when all of its tests pass and their
combined setup plus call time stays within ``budget_s``.  One line per
criterion is printed at the end of the run.
"""

from __future__ import annotations

import pytest

_CRITERIA: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when == "teardown":
        return
    number, title, budget = marker.args
    entry = _CRITERIA.setdefault(
        number, {"title": title, "budget": budget, "elapsed": 0.0, "failed": [], "tests": 0}
    )
    entry["elapsed"] += report.duration
    if report.when == "call":
        entry["tests"] += 1
        if report.passed and entry["elapsed"] > budget:
            report.outcome = "failed"
            report.longrepr = f"criterion {number} over budget: {entry['elapsed']:.1f} s > {budget} s"
    if report.failed:
        entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        status = "FAIL" if e["failed"] else "PASS"
        line = f"criterion {number:2d} {status}  {e['title']}  ({e['elapsed']:.1f} s of {e['budget']} s)"
        if e["failed"]:
            line += "  failing: " + ", ".join(e["failed"])
        tr.write_line(line)
