import numpy as np
import pytest

from seggauge.growcut import LABEL_BACKGROUND, LABEL_FOREGROUND, SeedPoint
from seggauge.tasks import Task


@pytest.fixture
def tiny_task():
    """A 9x9 bright square on a dark background with exact ground truth."""

    image = np.full((9, 9), 0.2)
    image[2:7, 2:7] = 0.8
    gt = np.zeros((9, 9), dtype=bool)
    gt[2:7, 2:7] = True
    return Task(task_id="tiny", image=image, ground_truth=gt)


@pytest.fixture
def tiny_fg_seed():
    return SeedPoint(4, 4, LABEL_FOREGROUND)


@pytest.fixture
def tiny_bg_seed():
    return SeedPoint(0, 0, LABEL_BACKGROUND)
