"""Lightweight prediction heads on frozen speech-foundation-model
features for hearing-impaired intelligibility scoring.

The package trains small heads (weighted-average pooling, temporal
transformers, double transformers) on precomputed per-layer encoder
features, sweeps encoder layers and embedding dimensions over
listener-disjoint three-fold splits, and ensembles the best model per
encoder with softmax-constrained weights.
"""

from sfmprobe import datastore, ensemble, heads, metrics, numerics, sweep, trainer

__version__ = "0.1.0"

__all__ = [
    "datastore",
    "ensemble",
    "heads",
    "metrics",
    "numerics",
    "sweep",
    "trainer",
    "__version__",
]
