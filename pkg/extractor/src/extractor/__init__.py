"""Feature extraction companion to the brainenc engine.

Wraps vision/language/multimodal torch models, captures every
tensor-producing submodule with forward hooks, flattens activations to one
row per event structure, and writes the NFEA feature files and manifest that
the engine ingests. Also builds the two event-list alignments (word onsets,
scene cuts) from transcript and frame metadata.
"""

__version__ = "0.1.0"

from extractor.errors import ExtractionError, JobError

__all__ = ["ExtractionError", "JobError", "__version__"]
