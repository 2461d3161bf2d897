import numpy as np
import pytest

from pdqeval.ground_truth import GroundTruthObject
from pdqeval.kernels import available_backends


def rect_object(x0, y0, w, h, class_id=0, instance_id=0, image=(64, 64), frame=0, hole=None):
    """Ground truth covering a w x h rectangle at (x0, y0); ``hole`` clears a sub-rectangle."""
    mask = np.zeros((image[1], image[0]), dtype=bool)
    mask[y0:y0 + h, x0:x0 + w] = True
    if hole is not None:
        hx, hy, hw, hh = hole
        mask[hy:hy + hh, hx:hx + hw] = False
    return GroundTruthObject.from_image_mask(mask, class_id, instance_id, frame)


@pytest.fixture(params=sorted(available_backends()))
def backend(request):
    return available_backends()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Acceptance verdicts, printed once at the end of the session.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
