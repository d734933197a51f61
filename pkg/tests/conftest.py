import numpy as np
import pytest

from fixlab.gaze import BoundingBox, Condition, Fixation, ImageAnnotation, ScanPath


def make_path(points, image_id="img", subject="s1", condition=Condition.FREE_VIEWING,
              onsets=None, durations=None, preprocessed=True):
    n = len(points)
    durations = durations or [0.2] * n
    if onsets is None:
        onsets, t = [], 0.0
        for d in durations:
            onsets.append(round(t, 6))
            t += d + 0.05
    fixes = tuple(Fixation(float(x), float(y), onsets[i], durations[i], i)
                  for i, (x, y) in enumerate(points))
    return ScanPath(image_id, subject, condition, fixes, preprocessed=preprocessed)


def make_ann(boxes, image_id="img", width=200, height=100):
    objs = tuple(BoundingBox(label, *coords) for label, coords in boxes)
    return ImageAnnotation(image_id, width, height, objs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
