import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))  # make tests/synth.py importable

_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.when == "call":
        outcome = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        _ACCEPTANCE_RESULTS.append((name, outcome))
    elif report.when == "setup" and report.skipped:
        _ACCEPTANCE_RESULTS.append((name, "SKIP"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, outcome in _ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"[{outcome}] {name}")
