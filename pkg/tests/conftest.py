import pytest

_criteria: list[tuple[int, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance criterion's verdict for the end-of-run summary."""

    def record(number: int, passed: bool, detail: str):
        _criteria.append((number, passed, detail))
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_criteria):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {detail}")
