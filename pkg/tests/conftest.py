import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from flowcycle import RunConfig  # noqa: E402
from flowcycle.runtime import live_contexts  # noqa: E402


@pytest.fixture
def threads(tmp_path):
    """Fast in-process execution settings."""
    return RunConfig(workdir=tmp_path / "run", isolation="thread", poll_interval=0.05, timeout=20)


@pytest.fixture
def processes(tmp_path):
    return RunConfig(workdir=tmp_path / "run", isolation="process", poll_interval=0.1, timeout=30)


@pytest.fixture(autouse=True)
def no_leaked_contexts():
    yield
    assert live_contexts() == 0


def pytest_terminal_summary(terminalreporter):
    from verdicts import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES):
            terminalreporter.write_line(line)
