"""Data-driven region-of-attraction certificates from piecewise affine
Lyapunov functions."""

from .certifier import CertificationResult, CertifierConfig, run, validate_roa
from .polytope import Hyperbox
from .systems import builtin_example, builtin_oracle
from .uncertainty import DataPoint, Dataset, LipschitzBound, evaluate_bounds

__all__ = [
    "CertificationResult",
    "CertifierConfig",
    "DataPoint",
    "Dataset",
    "Hyperbox",
    "LipschitzBound",
    "builtin_example",
    "builtin_oracle",
    "evaluate_bounds",
    "run",
    "validate_roa",
]
