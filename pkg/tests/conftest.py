import pytest

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance_report():
    def report(number, checks):
        """``checks`` maps a short description to a bool."""
        ok = all(checks.values())
        failed = [k for k, v in checks.items() if not v]
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}"
        if failed:
            line += " (" + "; ".join(failed) + ")"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return report
