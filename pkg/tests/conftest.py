import pytest

_LINES: dict[int, str] = {}


@pytest.fixture
def report():
    """Print and record one PASS/FAIL line for an acceptance criterion; fails the test if not ``ok``."""

    def _report(criterion: int, title: str, ok: bool, detail: str) -> None:
        line = f"CRITERION {criterion} ({title}): {'PASS' if ok else 'FAIL'} | {detail}"
        print(line)
        _LINES[criterion] = line
        if not ok:
            pytest.fail(line, pytrace=False)

    return _report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(_LINES):
            terminalreporter.write_line(_LINES[key])
