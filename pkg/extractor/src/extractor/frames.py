"""Frame lookup for image-consuming models.

Frames are small grayscale arrays keyed by the event's image_ref. The
directory source reads `<dir>/<image_ref>.npy`; the synthetic source derives
a deterministic frame from the ref itself (for demos and pipelines where the
actual movie is unavailable). A missing frame returns None and the caller
skips the event.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from extractor.toy import IMAGE_SIZE


class FrameSource:
    def get(self, image_ref: str) -> np.ndarray | None:
        raise NotImplementedError


class DirectoryFrameSource(FrameSource):
    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def get(self, image_ref: str) -> np.ndarray | None:
        path = self.directory / f"{image_ref}.npy"
        if not path.exists():
            return None
        return np.load(path)


class SyntheticFrameSource(FrameSource):
    """Deterministic pseudo-frames derived from the image_ref hash."""

    def get(self, image_ref: str) -> np.ndarray | None:
        digest = hashlib.sha256(image_ref.encode("utf-8")).digest()
        seed = int.from_bytes(digest[:8], "little")
        rng = np.random.default_rng(seed)
        return rng.random((IMAGE_SIZE, IMAGE_SIZE), dtype=np.float32)
