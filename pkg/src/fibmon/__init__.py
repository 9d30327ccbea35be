"""Monitored transverse-field Ising chains driven by quasiperiodic measurement schedules."""
from __future__ import annotations

__version__ = "0.1.0"

from .config import KrausConvention, Protocol, RunConfig, stream
from .errors import ConfigError, FibmonError, SizeError

__all__ = ["ConfigError", "FibmonError", "KrausConvention", "Protocol", "RunConfig", "SizeError", "__version__", "stream"]
