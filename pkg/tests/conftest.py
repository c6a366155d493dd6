import pytest

_ACCEPTANCE: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for the acceptance summary, then assert."""
    def record(number: int, title: str, ok: bool, detail: str = ""):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else "")
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
