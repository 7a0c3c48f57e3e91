"""
测试公共夹具
"""

from typing import Any, Dict, List, Optional

import pytest

from core.engine import SimEngine
from harness.scenario_loader import parse_scenario
from models.packet import Edc, Packet, create_downward_criteria, create_upward_criteria


def make_packet(origin=1, seq=1, dest=0, sender_edc: Optional[float] = 3.0, payload_len=20, downward=False) -> Packet:
    """构造测试分组"""
    if downward:
        criteria = create_downward_criteria(origin, seq, dest)
    else:
        criteria = create_upward_criteria(origin, seq, Edc.of(sender_edc) if sender_edc is not None else Edc())
    return Packet(origin=origin, final_dest=dest, seq=seq, ttl=16, payload_len=payload_len, criteria=criteria)


class FakePort:
    """记录信道回调的假MAC"""

    def __init__(self, on: bool = True, listening: bool = True):
        self.on = on
        self.listening = listening
        self.frames: List[Any] = []
        self.garbled: List[int] = []
        self.tx_done: List[Any] = []
        self.rx_starts = 0
        self.rx_ends = 0

    @property
    def is_on(self) -> bool:
        return self.on

    def can_receive(self) -> bool:
        return self.on and self.listening

    def on_rx_start(self, now: int):
        self.rx_starts += 1

    def on_rx_end(self, now: int):
        self.rx_ends += 1

    def on_frame(self, frame, now: int):
        self.frames.append((now, frame))

    def on_garbled(self, now: int):
        self.garbled.append(now)

    def on_tx_done(self, tx, now: int):
        self.tx_done.append((now, tx))


def scenario_dict(**overrides) -> Dict[str, Any]:
    """最小场景：2 节点线型，常供电"""
    data: Dict[str, Any] = {
        "name": "test",
        "seed": 1,
        "duration_s": 60,
        "topology": {"kind": "line", "n": 2},
        "energy": {"mode": "always_on"},
        "flows": [],
    }
    data.update(overrides)
    return data


@pytest.fixture
def engine():
    """创建测试用引擎"""
    return SimEngine()


@pytest.fixture
def line_scenario():
    """5 节点常供电线型场景"""
    return parse_scenario(
        scenario_dict(
            name="line5",
            duration_s=400,
            topology={"kind": "line", "n": 5, "spacing_m": 20},
            routing={"protocol": "orw"},
            flows=[{"source": 4, "period_s": 10, "jitter_s": 2, "count": 20, "start_s": 120}],
        )
    )
