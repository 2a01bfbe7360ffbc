import pytest

_RESULTS = []


@pytest.fixture
def criterion():
    """Record one acceptance line; returns the pass flag so the test can assert on it."""

    def record(name, passed, detail=""):
        _RESULTS.append((name, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, ok, detail in _RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
