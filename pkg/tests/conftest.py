import pytest

RESULTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def record():
    """Log one criterion outcome; the line is printed at the end of the run."""

    def _record(name: str, ok: bool, detail: str = "") -> bool:
        RESULTS.append((name, bool(ok), detail))
        return bool(ok)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
