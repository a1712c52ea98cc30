"""gonet: single-discriminator generative modeling by input-space
gradient ascent, with a reconstruction-based anomaly detection pipeline
for multivariate time series."""

from . import backend, data, gon, metrics, neural, optim, pipeline, pot, windows
from .errors import ConfigError, DataError, GonError, IoError, NumericError

__version__ = "0.1.0"

__all__ = [
    "backend",
    "data",
    "gon",
    "metrics",
    "neural",
    "optim",
    "pipeline",
    "pot",
    "windows",
    "GonError",
    "ConfigError",
    "DataError",
    "NumericError",
    "IoError",
    "__version__",
]
