"""DKT atlas region labels.

Electrode metadata carries a region label from the Desikan-Killiany-Tourville
cortical parcellation. The canonical label list ships with the package
(FreeSurfer-style concatenated names); an alternative lookup file may be
supplied for non-standard parcellations. Labels may carry an ``lh-`` or
``rh-`` hemisphere prefix, which is ignored for membership checks.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

_HEMI_PREFIXES = ("lh-", "rh-", "ctx-lh-", "ctx-rh-")


def load_region_labels(path: str | Path | None = None) -> frozenset[str]:
    """Load the set of valid region labels.

    With no path, returns the bundled DKT list (31 cortical regions).
    """
    if path is None:
        text = (
            resources.files("brainenc").joinpath("data/dkt_regions.txt").read_text("utf-8")
        )
    else:
        text = Path(path).read_text("utf-8")
    labels = [line.strip() for line in text.splitlines()]
    return frozenset(label for label in labels if label and not label.startswith("#"))


def base_region(label: str) -> str:
    """Strip a hemisphere prefix, if present."""
    for prefix in _HEMI_PREFIXES:
        if label.startswith(prefix):
            return label[len(prefix):]
    return label


def is_known_region(label: str, known: frozenset[str]) -> bool:
    return base_region(label) in known
