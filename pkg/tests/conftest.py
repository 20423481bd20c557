"""Print one PASS/FAIL line per acceptance criterion after the test session."""

import re

_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")
_results: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    n, name = int(m.group(1)), m.group(2)
    failed = report.failed or (report.when == "call" and report.skipped)
    if failed:
        _results[n] = ("FAIL", name)
    elif report.when == "call":
        _results.setdefault(n, ("PASS", name))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        status, name = _results[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {name.replace('_', ' ')}")
