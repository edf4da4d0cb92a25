"""Fog massive MIMO simulator and stochastic-geometry analytics."""

from .config import SystemConfig, emit_config, load_config, parse_config
from .errors import ConfigError, NumericalError, ParameterError
from .geometry import DiskPair, Window
from .kernels import BACKEND as KERNEL_BACKEND
from .montecarlo import SEReport, TrialConfig, simulate

__all__ = [
    "ConfigError", "DiskPair", "KERNEL_BACKEND", "NumericalError", "ParameterError",
    "SEReport", "SystemConfig", "TrialConfig", "Window", "emit_config", "load_config",
    "parse_config", "simulate",
]
