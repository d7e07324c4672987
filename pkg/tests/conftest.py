"""Per-criterion pass/fail summary for the acceptance suite.

Acceptance tests carry ``@pytest.mark.criterion(n, "title")`` and may attach
a one-line measurement with ``record_property("detail", text)``. A criterion
passes only if every test tagged with it passes.
"""
import pytest

_outcomes = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        number, title = marker.args
        entry = _outcomes.setdefault(number, {"title": title, "passed": True, "details": []})
        entry["passed"] &= report.passed
        entry["details"] += [v for k, v in item.user_properties if k == "detail"]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        entry = _outcomes[number]
        status = "PASS" if entry["passed"] else "FAIL"
        detail = "; ".join(entry["details"])
        line = f"criterion {number} {status}: {entry['title']}"
        terminalreporter.write_line(f"{line} ({detail})" if detail else line)
