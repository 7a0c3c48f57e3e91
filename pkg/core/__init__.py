"""
仿真核心模块
"""

from core.engine import PRIO_CHANNEL, PRIO_ENERGY, PRIO_TIMER, SimEngine, s_to_us, us_to_s
from core.errors import (
    InvariantViolation,
    MacLayerError,
    OppNetError,
    ScenarioError,
    SchedulingError,
    TlvDecodeError,
    TraceFormatError,
    UnsupportedDestinationError,
)

__all__ = [
    "SimEngine",
    "PRIO_CHANNEL",
    "PRIO_ENERGY",
    "PRIO_TIMER",
    "s_to_us",
    "us_to_s",
    "OppNetError",
    "SchedulingError",
    "ScenarioError",
    "MacLayerError",
    "UnsupportedDestinationError",
    "TlvDecodeError",
    "InvariantViolation",
    "TraceFormatError",
]
