"""Numerical library and batch CLI for spatio-temporal analysis of gridded
daily series: SVD-based time-detrending, Marchenko-Pastur signal/noise
separation, generalized-SVD comparisons with empirical nulls, and
Bergsma-correlation spatial association with temporal change summaries.
"""

from .errors import NumericalError, ValidationError

__version__ = "0.1.0"

__all__ = ["NumericalError", "ValidationError", "__version__"]
