import pytest

_ACCEPTANCE: list = []


@pytest.fixture
def acceptance():
    """Records one pass/fail line per acceptance check for the summary block."""

    def record(index: int, label: str, passed: bool, detail: str):
        _ACCEPTANCE.append((index, label, passed, detail))
        assert passed, f"[{index}] {label}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance battery")
    for index, label, passed, detail in sorted(_ACCEPTANCE):
        flag = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{flag}] {index:2d} {label}: {detail}")
