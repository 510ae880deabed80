import sys

from builders import two_player_game
import pytest


@pytest.fixture
def lq2():
    return two_player_game()


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(module.TITLES):
        line = module.RESULTS.get(num)
        if line is None:
            line = f"criterion {num} FAIL  {module.TITLES[num]} (not run or raised before reporting)"
        terminalreporter.write_line(line)
