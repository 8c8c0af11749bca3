import pytest

_RESULTS: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def record():
    """Store one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def _record(number: int, name: str, passed: bool, detail: str) -> bool:
        _RESULTS[number] = (name, bool(passed), detail)
        return bool(passed)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        name, passed, detail = _RESULTS[number]
        terminalreporter.write_line(f"[{number}] {'PASS' if passed else 'FAIL'}  {name}: {detail}")
