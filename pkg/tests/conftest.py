import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import fixtures  # noqa: E402


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """73 synthetic projects plus human rating sheets (14 projects flagged)."""
    root = tmp_path_factory.mktemp("corpus")
    fixtures.write_corpus(root)
    return root


@pytest.fixture
def dress_up_bytes():
    return fixtures.dress_up_project()


@pytest.fixture
def paint_box_bytes():
    return fixtures.paint_box_project()


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
