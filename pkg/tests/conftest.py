"""Prints a one-line verdict per acceptance criterion after the run."""
import pytest

_results = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    if "test_acceptance" not in report.nodeid:
        return
    _results[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for nodeid in sorted(_results):
        name = nodeid.split("::")[-1].replace("test_", "", 1)
        verdict = "PASS" if _results[nodeid] == "passed" else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {verdict}: {name}")
