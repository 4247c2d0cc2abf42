"""Model-to-brain encoding comparison engine.

Pipeline stages: event binning of raw signals, sparse random projection of
layerwise model features, contiguous k-fold ridge regression with Pearson
scoring, event-structure bootstrap confidence intervals, time-bin bootstrap
model comparisons with Benjamini-Hochberg FDR, and a battery of five
multimodality tests aggregated over DKT atlas regions.
"""

__version__ = "0.1.0"

from brainenc.errors import ConfigurationError, DataError, NumericalError

__all__ = ["ConfigurationError", "DataError", "NumericalError", "__version__"]
