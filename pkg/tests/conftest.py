import acceptance_report


def pytest_terminal_summary(terminalreporter):
    ran = any("test_acceptance.py" in r.nodeid
              for reports in terminalreporter.stats.values() for r in reports
              if hasattr(r, "nodeid"))
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n in acceptance_report.CRITERIA:
        terminalreporter.write_line(acceptance_report.format_line(n))
