"""Hybrid simulation of a human commander supervising an agent swarm."""

from .errors import (
    ConfigurationError,
    ContractViolation,
    EventLocalizationError,
    HybridError,
    NumericalFailure,
    UndefinedResult,
)
from .hybrid import HybridArc, HybridSystemDef, IntegratorConfig, JumpOption, solve
from .sar import MissionConfig, MissionResult, run_mission

__all__ = [
    "ConfigurationError",
    "ContractViolation",
    "EventLocalizationError",
    "HybridArc",
    "HybridError",
    "HybridSystemDef",
    "IntegratorConfig",
    "JumpOption",
    "MissionConfig",
    "MissionResult",
    "NumericalFailure",
    "UndefinedResult",
    "run_mission",
    "solve",
]
