"""
模型模块
"""

from models.metrics import FlowMetrics, MetricsSummary, NodeMetrics, flow_key
from models.packet import (
    BROADCAST_ADDR,
    NO_ROUTE,
    AckRef,
    Edc,
    ForwarderCriteria,
    Frame,
    FrameKind,
    MetricKind,
    Packet,
    TlvOption,
    create_ack_frame,
    create_advertisement_frame,
    create_downward_criteria,
    create_strobe_frame,
    create_upward_criteria,
)
from models.scenario import Scenario
from models.signals import EncounterKind, EncounterSignal
from models.trace import DROP_KINDS, TraceKind

__all__ = [
    "BROADCAST_ADDR",
    "NO_ROUTE",
    "AckRef",
    "Edc",
    "ForwarderCriteria",
    "Frame",
    "FrameKind",
    "MetricKind",
    "Packet",
    "TlvOption",
    "create_ack_frame",
    "create_advertisement_frame",
    "create_downward_criteria",
    "create_strobe_frame",
    "create_upward_criteria",
    "Scenario",
    "EncounterKind",
    "EncounterSignal",
    "TraceKind",
    "DROP_KINDS",
    "FlowMetrics",
    "MetricsSummary",
    "NodeMetrics",
    "flow_key",
]
