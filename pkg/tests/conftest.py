import pytest

_LINES: list[str] = []


class AcceptanceLog:
    """Collects one pass/fail line per acceptance check for the run summary."""

    def check(self, tag: str, ok: bool, what: str, detail: str = "") -> bool:
        line = f"{tag:<5} {'PASS' if ok else 'FAIL'}  {what}"
        if detail:
            line += f"  [{detail}]"
        _LINES.append(line)
        print(line)
        return ok


@pytest.fixture
def acceptance() -> AcceptanceLog:
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
