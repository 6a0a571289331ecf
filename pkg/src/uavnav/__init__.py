"""Invariant EKF navigation for fixed-wing UAVs.

The main entry points are :class:`NavFilter` / :func:`run_filter` for
estimation, :func:`simulate` for synthetic flights and
:func:`compute_metrics` for evaluation.  ``BACKEND`` names the kernel
implementation in use (``"cython"`` or ``"python"``).
"""

from ._backend import BACKEND
from .config import FilterConfig, load_config
from .metrics import MetricsReport, compute_metrics
from .simulator import Scenario, Segment, SensorSpec, simulate
from .state import FullState, Variant
from .updates import NavFilter, StateHistory, run_filter

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "FilterConfig",
    "FullState",
    "MetricsReport",
    "NavFilter",
    "Scenario",
    "Segment",
    "SensorSpec",
    "StateHistory",
    "Variant",
    "compute_metrics",
    "load_config",
    "run_filter",
    "simulate",
]
