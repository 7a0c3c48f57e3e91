"""
跨层接口
MAC 与路由之间只通过这五个接口交互：
发送（IOpportunisticLinkLayer）、接受判定（IForwardingJudge）、
链路侦听（ILinkOverhearingSource）、路由侦听（IRoutingOverhearingSource）、
发送推迟（IDeferTransmission）
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Protocol, runtime_checkable

from models.packet import ForwarderCriteria, FrameKind, Packet
from models.signals import EncounterSignal


class DeferReason(str, Enum):
    """推迟原因"""
    NO_HISTORY = "NO_HISTORY"
    PREDICTED_ASLEEP = "PREDICTED_ASLEEP"
    PREDICTED_AWAKE = "PREDICTED_AWAKE"


@dataclass(frozen=True, slots=True)
class DeferDecision:
    """推迟决定，defer_for 单位微秒且不超过一个唤醒周期"""
    defer_for: int
    reason: DeferReason


RoutingListener = Callable[[int, Packet, FrameKind, int], None]


@runtime_checkable
class IOpportunisticLinkLayer(Protocol):
    """机会单播MAC"""

    def send_anycast(self, packet: Packet, criteria: ForwarderCriteria, now: int): ...

    def send_broadcast(self, packet: Packet, now: int): ...

    def is_idle(self) -> bool: ...


@runtime_checkable
class IForwardingJudge(Protocol):
    """竞争前的接受判定"""

    def judge(self, criteria: ForwarderCriteria, now: int, sender: Optional[int] = None) -> bool: ...

    def release(self, criteria: ForwarderCriteria) -> None: ...


@runtime_checkable
class ILinkOverhearingSource(Protocol):
    """MAC侧信号源"""

    def add_link_listener(self, listener: Callable[[EncounterSignal], None]) -> None: ...


@runtime_checkable
class IRoutingOverhearingSource(Protocol):
    """侦听到的路由内容（对端、分组、帧类型、时刻）"""

    def add_routing_listener(self, listener: RoutingListener) -> None: ...


@runtime_checkable
class IDeferTransmission(Protocol):
    """发送推迟预测"""

    def should_defer(
        self, peer_hint: Optional[int], now: int, candidates: Optional[List[int]] = None
    ) -> DeferDecision: ...


class NoDeferral:
    """不推迟的基线策略"""

    def should_defer(
        self, peer_hint: Optional[int], now: int, candidates: Optional[List[int]] = None
    ) -> DeferDecision:
        return DeferDecision(0, DeferReason.NO_HISTORY)
