"""
帧与分组数据模型
仿真热路径上的类型用不可变 dataclass，字段变化通过 dataclasses.replace 生成新对象
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from functools import total_ordering
from typing import Optional, Tuple

# 广播地址（通告帧的目的地址）
BROADCAST_ADDR = 0xFFFF

# 分组头：origin(2) final_dest(2) seq(2) ttl(1) metric(1) edc(2, 定点) opt_count(1)
NET_HEADER_BYTES = 11
# MAC头：kind(1) src(2) strobe_seq(2) flags(1) FCS(2)
MAC_HEADER_BYTES = 8
# ACK：kind(1) acker(2) dest(2) origin(2) seq(2) FCS(2)
ACK_FRAME_BYTES = 11
# TLV选项的 type + length 字节
TLV_HEADER_BYTES = 2


@total_ordering
@dataclass(frozen=True, slots=True)
class Edc:
    """EDC取值，value为None表示无路由（比任何有限值都大）"""
    value: Optional[float] = None

    @classmethod
    def of(cls, value: float) -> "Edc":
        if value < 0:
            raise ValueError(f"EDC不能为负: {value}")
        return cls(float(value))

    @property
    def is_finite(self) -> bool:
        return self.value is not None

    def __lt__(self, other: "Edc") -> bool:
        if not isinstance(other, Edc):
            return NotImplemented
        if self.value is None:
            return False
        if other.value is None:
            return True
        return self.value < other.value

    def plus(self, delta: float) -> "Edc":
        if self.value is None:
            return self
        return Edc(self.value + delta)

    def to_json(self) -> Optional[float]:
        return self.value

    def __repr__(self) -> str:
        return "Edc(NO_ROUTE)" if self.value is None else f"Edc({self.value:.6g})"


NO_ROUTE = Edc(None)


class MetricKind(str, Enum):
    """转发准则类型"""
    UPWARD_EDC = "UPWARD_EDC"
    DOWNWARD_SET = "DOWNWARD_SET"


class FrameKind(str, Enum):
    """MAC帧类型"""
    DATA_STROBE = "DATA_STROBE"
    ACK = "ACK"
    ADVERTISEMENT = "ADVERTISEMENT"


@dataclass(frozen=True, slots=True)
class ForwarderCriteria:
    """随分组下发给MAC的转发者选择准则"""
    metric: MetricKind
    origin: int
    packet_seq: int
    sender_edc: Optional[Edc] = None
    final_dest: Optional[int] = None

    def __post_init__(self):
        if (self.metric == MetricKind.UPWARD_EDC) != (self.sender_edc is not None):
            raise ValueError("sender_edc 只在 UPWARD_EDC 准则中出现")

    @property
    def packet_id(self) -> Tuple[int, int]:
        return (self.origin, self.packet_seq)


@dataclass(frozen=True, slots=True)
class TlvOption:
    """TLV选项，value为编码后的字节"""
    type: int
    value: bytes

    @property
    def length(self) -> int:
        return len(self.value)

    @property
    def encoded_size(self) -> int:
        return TLV_HEADER_BYTES + len(self.value)


@dataclass(frozen=True, slots=True)
class Packet:
    """网络层分组

    hops / edc_tags / created_at 只用于仿真记账，不计入帧长
    """
    origin: int
    final_dest: int
    seq: int
    ttl: int
    payload_len: int
    criteria: ForwarderCriteria
    tlv_options: Tuple[TlvOption, ...] = ()
    created_at: int = 0
    hops: Tuple[int, ...] = ()
    edc_tags: Tuple[float, ...] = ()

    @property
    def packet_id(self) -> Tuple[int, int]:
        return (self.origin, self.seq)

    @property
    def size_bytes(self) -> int:
        return NET_HEADER_BYTES + self.payload_len + sum(o.encoded_size for o in self.tlv_options)

    def with_criteria(self, criteria: ForwarderCriteria) -> "Packet":
        return replace(self, criteria=criteria)


@dataclass(frozen=True, slots=True)
class AckRef:
    """ACK引用的被确认分组"""
    dest: int
    origin: int
    packet_seq: int


@dataclass(frozen=True, slots=True)
class Frame:
    """MAC帧：DATA_STROBE/ADVERTISEMENT 携带分组，ACK 只携带确认者和引用"""
    kind: FrameKind
    src: int
    strobe_seq: int = 0
    packet: Optional[Packet] = None
    acker: Optional[int] = None
    ack_ref: Optional[AckRef] = None
    contention_flag: bool = False

    def __post_init__(self):
        if self.kind == FrameKind.ACK:
            if self.packet is not None or self.acker is None:
                raise ValueError("ACK 不携带分组且必须有确认者")
        elif self.packet is None:
            raise ValueError(f"{self.kind.value} 必须携带一个分组")

    @property
    def size_bytes(self) -> int:
        if self.kind == FrameKind.ACK:
            return ACK_FRAME_BYTES
        return MAC_HEADER_BYTES + self.packet.size_bytes


def create_upward_criteria(origin: int, packet_seq: int, sender_edc: Edc) -> ForwarderCriteria:
    """创建上行准则"""
    return ForwarderCriteria(
        metric=MetricKind.UPWARD_EDC,
        origin=origin,
        packet_seq=packet_seq,
        sender_edc=sender_edc,
    )


def create_downward_criteria(origin: int, packet_seq: int, final_dest: int) -> ForwarderCriteria:
    """创建下行准则"""
    return ForwarderCriteria(
        metric=MetricKind.DOWNWARD_SET,
        origin=origin,
        packet_seq=packet_seq,
        final_dest=final_dest,
    )


def create_strobe_frame(src: int, packet: Packet, strobe_seq: int, contention_flag: bool) -> Frame:
    """创建数据选通帧"""
    return Frame(
        kind=FrameKind.DATA_STROBE,
        src=src,
        strobe_seq=strobe_seq,
        packet=packet,
        contention_flag=contention_flag,
    )


def create_ack_frame(acker: int, strobe: Frame) -> Frame:
    """创建应答帧，引用选通帧中的分组"""
    packet = strobe.packet
    return Frame(
        kind=FrameKind.ACK,
        src=acker,
        strobe_seq=strobe.strobe_seq,
        acker=acker,
        ack_ref=AckRef(dest=strobe.src, origin=packet.origin, packet_seq=packet.seq),
    )


def create_advertisement_frame(src: int, packet: Packet, strobe_seq: int) -> Frame:
    """创建通告帧"""
    return Frame(kind=FrameKind.ADVERTISEMENT, src=src, strobe_seq=strobe_seq, packet=packet)
