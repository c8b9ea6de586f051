import pytest

VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(label: str, checks: dict[str, bool], detail: str = "") -> None:
        ok = all(checks.values())
        failed = ", ".join(name for name, good in checks.items() if not good)
        line = f"{'PASS' if ok else 'FAIL'} {label}" + (f" | {detail}" if detail else "")
        if failed:
            line += f" | failed: {failed}"
        VERDICTS.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
