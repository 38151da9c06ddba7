"""Frontier efficiency estimation and explainable classification of its drivers."""

from .errors import ConfigError, DataError, NumericError

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataError", "NumericError", "__version__"]
