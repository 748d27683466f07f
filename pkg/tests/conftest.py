import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Re-emit the acceptance report after the run; capture may swallow it."""
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "REPORT_LINES", None) if module else None
    if lines:
        terminalreporter.section("acceptance report")
        for line in lines:
            terminalreporter.write_line(line)
