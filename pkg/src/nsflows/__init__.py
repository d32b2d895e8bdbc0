"""Spectral-data flows, nonlocal Riemann-Hilbert reconstruction and KPI checks."""
from .core_fields import Grid1D, SampledField, central_difference, fourier_shift, make_uniform_grid
from .errors import (CalibrationError, DomainError, InvalidArgumentError, MalformedFileError,
                     NoConvergenceError, NSFlowsError, QuadratureDivergenceError,
                     SingularSystemError, TruncationError)
from .fieldio import load_field, store_field
from .spectral_flows import SpectralKernel, make_spectral_kernel

__version__ = "0.1.0"

__all__ = [
    "Grid1D", "SampledField", "central_difference", "fourier_shift", "make_uniform_grid",
    "load_field", "store_field", "SpectralKernel", "make_spectral_kernel",
    "NSFlowsError", "InvalidArgumentError", "MalformedFileError", "TruncationError",
    "NoConvergenceError", "SingularSystemError", "DomainError", "CalibrationError",
    "QuadratureDivergenceError", "__version__",
]
