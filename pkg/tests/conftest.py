import pytest

_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for the acceptance summary."""

    def record(criterion: str, passed: bool, detail: str) -> bool:
        _VERDICTS.append(f"{'PASS' if passed else 'FAIL'}  {criterion}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
