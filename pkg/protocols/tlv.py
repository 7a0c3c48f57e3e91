"""
路由集合TLV中间件
路由之后、交给MAC之前附加集合选项；进入路由层接受判定之前剥离选项

选项线格式（位精确）:
    [type: 1][length: 1][flags: 1 (bit0=bloom，必须为0)][version: 2 大端][entries: length-3 字节，每个地址2字节大端]
"""

import enum
import struct
from dataclasses import replace
from typing import Callable, List, Optional, Sequence, Tuple

from core.errors import TlvDecodeError
from models.packet import BROADCAST_ADDR, TLV_HEADER_BYTES, Packet, TlvOption
from protocols.routing_set import RoutingSet
from utils.rng import RngStream


class TlvType(enum.IntEnum):
    """选项类型码，未知类型原样保留"""
    ROUTING_SET = 0x52


FLAG_BLOOM = 0x01

_SET_PREFIX = struct.Struct(">BH")  # flags, version
_ADDR = struct.Struct(">H")

MAX_VALUE_BYTES = 0xFF
MAX_SET_ENTRIES = (MAX_VALUE_BYTES - _SET_PREFIX.size) // _ADDR.size


def encode_routing_set(routing_set: RoutingSet) -> TlvOption:
    """把路由集合编码为一个 ROUTING_SET 选项，地址按升序"""
    entries = sorted(routing_set.entries)
    if len(entries) > MAX_SET_ENTRIES:
        raise ValueError(f"路由集合 {len(entries)} 项超过单个选项上限 {MAX_SET_ENTRIES}")
    body = bytearray(_SET_PREFIX.pack(0, routing_set.version & 0xFFFF))
    for addr in entries:
        if not 0 <= addr < BROADCAST_ADDR:
            raise ValueError(f"非法节点地址: {addr}")
        body += _ADDR.pack(addr)
    return TlvOption(type=TlvType.ROUTING_SET, value=bytes(body))


def decode_routing_set(option: TlvOption) -> RoutingSet:
    """解码 ROUTING_SET 选项，格式错误抛出 TlvDecodeError"""
    value = option.value
    if option.type != TlvType.ROUTING_SET:
        raise TlvDecodeError(f"不是路由集合选项: type=0x{option.type:02x}")
    if len(value) < _SET_PREFIX.size:
        raise TlvDecodeError("路由集合选项过短", details={"length": len(value)})
    if len(value) > MAX_VALUE_BYTES:
        raise TlvDecodeError("路由集合选项超过255字节", details={"length": len(value)})
    if (len(value) - _SET_PREFIX.size) % _ADDR.size:
        raise TlvDecodeError("地址区长度不是2的倍数", details={"length": len(value)})
    flags, version = _SET_PREFIX.unpack_from(value, 0)
    if flags & FLAG_BLOOM:
        raise TlvDecodeError("不支持Bloom编码的路由集合", details={"flags": flags})
    entries = set()
    for offset in range(_SET_PREFIX.size, len(value), _ADDR.size):
        (addr,) = _ADDR.unpack_from(value, offset)
        if addr == BROADCAST_ADDR:
            raise TlvDecodeError("路由集合包含广播地址")
        entries.add(addr)
    return RoutingSet(frozenset(entries), version)


def encode_options(options: Sequence[TlvOption]) -> bytes:
    """选项序列的线格式"""
    out = bytearray()
    for option in options:
        if option.length > MAX_VALUE_BYTES:
            raise ValueError(f"选项 0x{option.type:02x} 长度 {option.length} 超过255")
        out += struct.pack(">BB", option.type, option.length)
        out += option.value
    return bytes(out)


def decode_options(buf: bytes) -> Tuple[TlvOption, ...]:
    """解析选项序列；长度越界抛出 TlvDecodeError"""
    options: List[TlvOption] = []
    offset = 0
    while offset < len(buf):
        if len(buf) - offset < TLV_HEADER_BYTES:
            raise TlvDecodeError("选项头被截断", details={"offset": offset})
        opt_type, length = struct.unpack_from(">BB", buf, offset)
        offset += TLV_HEADER_BYTES
        if offset + length > len(buf):
            raise TlvDecodeError("选项值被截断", details={"type": opt_type, "length": length})
        options.append(TlvOption(type=opt_type, value=bytes(buf[offset:offset + length])))
        offset += length
    return tuple(options)


def attach_routing_set(
    packet: Packet,
    routing_set: RoutingSet,
    rng: RngStream,
    p_piggyback: float,
    force: bool = False,
) -> Packet:
    """以 p_piggyback 的概率附加路由集合选项（至多一个，已有的被替换）"""
    if not force and not rng.bernoulli(p_piggyback):
        return packet
    kept = tuple(o for o in packet.tlv_options if o.type != TlvType.ROUTING_SET)
    return replace(packet, tlv_options=kept + (encode_routing_set(routing_set),))


def strip_routing_set(
    packet: Packet,
    on_malformed: Optional[Callable[[TlvDecodeError], None]] = None,
) -> Tuple[Packet, Optional[RoutingSet]]:
    """剥离路由集合选项，返回 (分组, 集合或None)

    损坏的选项被丢弃，分组照常交付；其他类型的选项保持原样。
    """
    found = [o for o in packet.tlv_options if o.type == TlvType.ROUTING_SET]
    if not found:
        return packet, None
    kept = tuple(o for o in packet.tlv_options if o.type != TlvType.ROUTING_SET)
    stripped = replace(packet, tlv_options=kept)
    try:
        return stripped, decode_routing_set(found[0])
    except TlvDecodeError as e:
        if on_malformed is not None:
            on_malformed(e)
        return stripped, None

