from acceptance_report import LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not LINES:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for line in LINES:
        terminalreporter.write_line(line)
