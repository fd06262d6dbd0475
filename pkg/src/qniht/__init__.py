"""Sparse recovery by normalized iterative hard thresholding, in full and low precision."""

__version__ = "0.1.0"

from .linalg import (
    DimensionError,
    DomainError,
    MeasurementMatrix,
    Observation,
    SparseSignal,
    apply,
    apply_adjoint,
    hard_threshold,
    read_matrix,
    write_matrix,
)
from .niht import LowPrecision, RecoveryConfig, RecoveryReport, niht_recover, qniht_recover
from .quantize import QuantizerConfig, dequantize, quantize_tensor


__all__ = [
    "DimensionError",
    "DomainError",
    "MeasurementMatrix",
    "Observation",
    "SparseSignal",
    "apply",
    "apply_adjoint",
    "hard_threshold",
    "read_matrix",
    "write_matrix",
    "LowPrecision",
    "RecoveryConfig",
    "RecoveryReport",
    "niht_recover",
    "qniht_recover",
    "QuantizerConfig",
    "dequantize",
    "quantize_tensor",
]
