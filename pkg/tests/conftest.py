"""Shared pytest plumbing: collect acceptance-criterion verdict lines and
echo them in the terminal summary, where output capture cannot hide them."""

VERDICT_LINES = []


def record_verdict(line):
    VERDICT_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if VERDICT_LINES:
        terminalreporter.section("acceptance criteria")
        for line in VERDICT_LINES:
            terminalreporter.write_line(line)
