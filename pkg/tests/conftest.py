import pytest

from prefattach.model import PaGraph

#: (criterion, passed, detail) lines gathered by the acceptance suite
CRITERIA: list[tuple[str, bool, str]] = []


def record(criterion: str, passed: bool, detail: str) -> None:
    CRITERIA.append((criterion, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in CRITERIA:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL':4}  {name:<44} {detail}")


@pytest.fixture
def star():
    """m=1, n=3 with 2 -> 1 and 3 -> 1."""
    return PaGraph(1, 3, [[1], [1]])


@pytest.fixture
def path():
    """m=1, n=3 with 2 -> 1 and 3 -> 2."""
    return PaGraph(1, 3, [[1], [2]])
