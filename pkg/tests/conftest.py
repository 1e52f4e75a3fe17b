"""Collects one verdict line per acceptance criterion for the terminal summary."""

VERDICTS: list[str] = []


def record(number: int, ok: bool, detail: str) -> None:
    VERDICTS.append(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    print(VERDICTS[-1])


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
