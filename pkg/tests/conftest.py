import numpy as np
import pytest

from laminacurve.scan import Pose, ScanDataset, TrackedFrame

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_frame(index, intensity, mask=None, position=(0.0, 0.0, 0.0), orientation=(1.0, 0.0, 0.0, 0.0),
               spacing=(0.5, 0.5)):
    intensity = np.asarray(intensity, dtype=np.uint8)
    if mask is None:
        mask = (intensity > 0).astype(np.uint8)
    return TrackedFrame(index, intensity, np.asarray(mask, dtype=np.uint8), Pose(position, orientation), spacing)


def make_dataset(frames, subject="T", posture="neutral"):
    size = frames[0].size if frames else None
    return ScanDataset(frames, subject, posture, size)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
