from __future__ import annotations

import re

_ACCEPTANCE = re.compile(r"test_acceptance\.py::test_(\d+)_(\w+)$")
_outcomes: dict[int, tuple[str, str, float]] = {}


def pytest_runtest_logreport(report):
    m = _ACCEPTANCE.search(report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    name = m.group(2).replace("_", " ")
    if report.when == "call" or report.failed:
        prev = _outcomes.get(n)
        if prev is None or prev[0] == "PASS":
            _outcomes[n] = ("PASS" if report.passed else "FAIL", name, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        status, name, dur = _outcomes[n]
        terminalreporter.write_line(f"criterion {n} {name}: {status} ({dur:.2f} s)")
