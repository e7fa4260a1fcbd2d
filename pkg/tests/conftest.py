import pytest

_CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record a pass/fail line for an acceptance criterion: ``criterion(k, ok, detail)``."""
    def record(k, ok, detail=""):
        prev = _CRITERIA.get(k, (True, ""))
        ok = bool(ok) and prev[0]
        text = "; ".join(s for s in (prev[1], detail) if s)
        _CRITERIA[k] = (ok, text)
        print(f"criterion {k}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        ok, text = _CRITERIA[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {text}")
