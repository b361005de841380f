def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for cid in sorted(LINES, key=lambda c: int(c[1:])):
            terminalreporter.write_line(LINES[cid])
