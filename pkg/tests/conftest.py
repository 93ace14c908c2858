import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Print an acceptance line now and repeat it in the terminal summary."""
    def emit(check):
        line = check.line()
        print(line)
        ACCEPTANCE_LINES.append(line)
        return check
    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
