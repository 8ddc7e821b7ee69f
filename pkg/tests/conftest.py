import pytest

_LINES = {}


@pytest.fixture
def verdict():
    """Record the PASS/FAIL line of an acceptance criterion, then assert on it."""
    def record(num, ok, detail):
        line = f"criterion {num}: {'PASS' if ok else 'FAIL'} | {detail}"
        _LINES[num] = line
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_LINES):
        terminalreporter.write_line(_LINES[num])
