"""antclust: stigmergic ant-colony clustering on a toroidal grid, with
marker-based k-NN classification of the resulting spatial layout."""

from .errors import AntclustError, ConfigError, DataError, InternalError

__version__ = "0.1.0"

__all__ = [
    "AntclustError",
    "ConfigError",
    "DataError",
    "InternalError",
    "__version__",
]
