"""
链路侦听信号模型
MAC层按相遇类型发出信号，邻居表订阅这些信号
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from models.packet import Frame


class EncounterKind(str, Enum):
    """相遇类型"""
    EXPECTED = "EXPECTED"  # 应答本节点选通的ACK
    COINCIDENTAL = "COINCIDENTAL"  # 首次收到的选通、通告或他人的ACK
    EXPECTED_PERIOD_END = "EXPECTED_PERIOD_END"  # 侦听窗口结束


@dataclass(frozen=True, slots=True)
class EncounterSignal:
    """一次相遇信号"""
    kind: EncounterKind
    at: int
    peer: Optional[int] = None
    frame: Optional[Frame] = None

    def __post_init__(self):
        if self.kind == EncounterKind.EXPECTED_PERIOD_END:
            if self.frame is not None:
                raise ValueError("窗口结束信号不携带帧")
        elif self.peer is None or self.frame is None:
            raise ValueError(f"{self.kind.value} 信号必须携带对端和帧")


def create_expected_signal(peer: int, frame: Frame, at: int) -> EncounterSignal:
    return EncounterSignal(kind=EncounterKind.EXPECTED, at=at, peer=peer, frame=frame)


def create_coincidental_signal(peer: int, frame: Frame, at: int) -> EncounterSignal:
    return EncounterSignal(kind=EncounterKind.COINCIDENTAL, at=at, peer=peer, frame=frame)


def create_period_end_signal(at: int, peer: Optional[int] = None) -> EncounterSignal:
    return EncounterSignal(kind=EncounterKind.EXPECTED_PERIOD_END, at=at, peer=peer)
