"""Shared fixtures and the acceptance summary printed at the end of a run."""

from __future__ import annotations

import pytest

from maxlab.geometry import BallComplement, Disk, HalfPlane

# lines appended by the acceptance criteria, printed in the terminal summary
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def half_plane():
    return HalfPlane((0.0, 1.0), 0.0, ((-4.0, 0.0), (4.0, 8.0)))


@pytest.fixture
def unit_disk():
    return Disk((0.0, 0.0), 1.0)


@pytest.fixture
def ball_complement():
    return BallComplement((0.0, 0.0), 1.0, ((-4.0, -4.0), (4.0, 4.0)))

