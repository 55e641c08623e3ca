import pytest

_AC_LINES = []


@pytest.fixture
def ac_report():
    """Record one acceptance line: ``ac_report("AC1", passed, "detail")``."""

    def record(tag, passed, detail=""):
        line = f"{tag}: {'PASS' if passed else 'FAIL'}  {detail}".rstrip()
        _AC_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _AC_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_AC_LINES, key=lambda s: int(s[2:s.index(":")])):
            terminalreporter.write_line(line)
