import pytest

_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record the outcome of one numbered acceptance criterion for the end-of-run summary."""

    def record(number: int, title: str, passed: bool, detail: str = ""):
        _CRITERIA[number] = (title, bool(passed), detail)
        print(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}  {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}  {detail}")
