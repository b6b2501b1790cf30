"""rc-treatment-effects - treatment effects under a random-coefficients selection equation."""

from .config import AppConfig, ConfigError  # noqa: F401
from .estimation.base import EstimationError, Sample  # noqa: F401
from .runtime import StudyRuntime  # noqa: F401

__all__ = ["AppConfig", "ConfigError", "EstimationError", "Sample", "StudyRuntime", "__version__"]

__version__ = "0.1.0"
