"""Shared pytest hooks: echo the acceptance PASS/FAIL lines in the
terminal summary so they are visible without -s."""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = []
    for name, module in list(sys.modules.items()):
        if name.rpartition(".")[2] == "test_acceptance":
            lines = getattr(module, "ACCEPTANCE_LINES", [])
            if lines:
                break
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
