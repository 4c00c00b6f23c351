"""Shared pytest wiring for the acceptance suite.

Acceptance tests register one summary line each; printing happens in the
terminal-summary hook so the lines land after pytest's capture is done
and survive into piped output.
"""

ACCEPTANCE_LINES: list[tuple[int, str]] = []


def record_acceptance(number: int, name: str, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append((number, f"[{status}] {number:2d} {name}: {detail}"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES, key=lambda item: item[0]):
        terminalreporter.write_line(line)
