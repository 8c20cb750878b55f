import pytest

_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one pass/fail line per acceptance criterion, then assert it."""
    def record(name: str, ok: bool, detail: str):
        _VERDICTS.append(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        print(_VERDICTS[-1])
        assert ok, detail
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
