import numpy as np
import pytest

from brainenc.events import Alignment, EventStructure
from brainenc.formats import write_events_csv

from extractor.toy import IMAGE_SIZE


@pytest.fixture
def language_events(tmp_path):
    events = [
        EventStructure(i, 1000.0 * (i + 1), f"word number {i} in context", f"frame_{i:03d}",
                       Alignment.LANGUAGE)
        for i in range(12)
    ]
    path = tmp_path / "events_language.csv"
    write_events_csv(path, events)
    return path, events


@pytest.fixture
def vision_events(tmp_path):
    events = [
        EventStructure(i, 2000.0 * (i + 1), f"sentence after cut {i}", f"frame_{i:03d}",
                       Alignment.VISION)
        for i in range(12)
    ]
    path = tmp_path / "events_vision.csv"
    write_events_csv(path, events)
    return path, events


@pytest.fixture
def frames_dir(tmp_path):
    d = tmp_path / "frames"
    d.mkdir()
    rng = np.random.default_rng(0)
    for i in range(12):
        np.save(d / f"frame_{i:03d}.npy", rng.random((IMAGE_SIZE, IMAGE_SIZE), dtype=np.float32))
    return d
