"""Shared pytest wiring.

The acceptance suite prints one PASS/FAIL line per criterion at the end
of the session; criteria are test functions named test_criterion_NN_*
in tests/test_acceptance.py.
"""

import re


def pytest_terminal_summary(terminalreporter):
    pattern = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")
    lines = {}
    for outcome in ("passed", "failed", "error", "skipped"):
        for report in terminalreporter.stats.get(outcome, []):
            match = pattern.search(getattr(report, "nodeid", ""))
            if match and getattr(report, "when", "call") == "call":
                number = int(match.group(1))
                label = match.group(2)
                lines[number] = (label, outcome.upper())
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for number in sorted(lines):
            label, outcome = lines[number]
            status = "PASS" if outcome == "PASSED" else outcome
            terminalreporter.write_line(f"criterion {number:2d} {label}: {status}")
