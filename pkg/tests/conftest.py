import sys


def pytest_terminal_summary(terminalreporter):
    module = next((m for name, m in list(sys.modules.items()) if name.endswith("test_acceptance")), None)
    lines = module.summary_lines() if module is not None and hasattr(module, "summary_lines") else []
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
