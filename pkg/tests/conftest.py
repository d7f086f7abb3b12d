import pytest

_CRITERIA: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def report():
    """Record one pass/fail line for an acceptance criterion; printed at the end of the session."""

    def _report(key: str, passed: bool, detail: str):
        _CRITERIA[key] = (passed, detail)
        print(f"[{'PASS' if passed else 'FAIL'}] {key}: {detail}")

    return _report


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: int(k.split()[1].rstrip("ab"))):
        passed, detail = _CRITERIA[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {key}: {detail}")
