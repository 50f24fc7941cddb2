import pytest

# criterion id -> (passed, detail), filled by the acceptance tests
ACCEPTANCE_RESULTS: dict = {}


def record(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[criterion] = (bool(passed), detail)
    print(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")


@pytest.fixture
def acceptance_record():
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
