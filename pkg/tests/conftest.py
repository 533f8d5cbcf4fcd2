import numpy as np
import pytest

from rispose.channel import Pose, Scenario


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def scenario():
    return Scenario()


def interior_pose(rng, sc=None):
    """Random pose away from the anchors, angles inside (0, pi/4)."""
    sc = sc or Scenario()
    while True:
        pos = rng.uniform([0.5, 0.5, 0.3], [sc.room_L - 0.5, sc.room_L - 0.5, sc.room_H - 0.3])
        if min(np.linalg.norm(pos - sc.bs_pose.position), np.linalg.norm(pos - sc.ris_pose.position)) > 1.0:
            return Pose(pos, rng.uniform(0.05, np.pi / 4 - 0.05, 3))


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion; printed after the run."""
    def record(number: int, passed: bool, detail: str) -> bool:
        _ACCEPTANCE[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(_ACCEPTANCE[number])
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
