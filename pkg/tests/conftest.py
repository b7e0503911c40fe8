from hypothesis import settings

from helpers import ACCEPTANCE_LINES

settings.register_profile("levyterm", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("levyterm")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
