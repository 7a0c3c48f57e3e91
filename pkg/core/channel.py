"""
广播无线信道
单位圆盘连通性 + 逐接收者二元碰撞模型，无捕获效应
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from core.engine import PRIO_CHANNEL, Event, SimEngine
from core.errors import MacLayerError
from models.packet import Frame
from models.trace import TraceKind
from utils.logger import get_logger
from utils.rng import RngStream

logger = get_logger("channel")


class Topology:
    """节点坐标与单位圆盘邻接关系"""

    def __init__(self, positions: Dict[int, Tuple[float, float]], comm_range: float):
        self.comm_range = float(comm_range)
        self.node_ids: List[int] = sorted(positions)
        self.positions = {n: (float(positions[n][0]), float(positions[n][1])) for n in self.node_ids}
        self._index = {n: i for i, n in enumerate(self.node_ids)}
        coords = np.array([self.positions[n] for n in self.node_ids], dtype=float).reshape(-1, 2)
        diff = coords[:, None, :] - coords[None, :, :]
        self._dist = np.sqrt((diff ** 2).sum(axis=-1))
        reach = self._dist <= self.comm_range
        np.fill_diagonal(reach, False)
        self._neighbors: Dict[int, Tuple[int, ...]] = {
            n: tuple(self.node_ids[j] for j in np.flatnonzero(reach[i]))
            for i, n in enumerate(self.node_ids)
        }

    def distance(self, a: int, b: int) -> float:
        return float(self._dist[self._index[a], self._index[b]])

    def in_range(self, a: int, b: int) -> bool:
        return a != b and self.distance(a, b) <= self.comm_range

    def neighbors(self, node: int) -> Tuple[int, ...]:
        """范围内的其他节点（升序）"""
        return self._neighbors[node]

    def is_connected(self) -> bool:
        """连通性检查（广度优先）"""
        if not self.node_ids:
            return True
        seen = {self.node_ids[0]}
        frontier = [self.node_ids[0]]
        while frontier:
            current = frontier.pop()
            for peer in self._neighbors[current]:
                if peer not in seen:
                    seen.add(peer)
                    frontier.append(peer)
        return len(seen) == len(self.node_ids)

    def hop_distances(self, root: int) -> Dict[int, int]:
        """从 root 出发的最少跳数"""
        dist = {root: 0}
        frontier = [root]
        while frontier:
            nxt = []
            for current in frontier:
                for peer in self._neighbors[current]:
                    if peer not in dist:
                        dist[peer] = dist[current] + 1
                        nxt.append(peer)
            frontier = nxt
        return dist


class RadioPort(Protocol):
    """信道回调到节点MAC的接口"""

    @property
    def is_on(self) -> bool: ...

    def can_receive(self) -> bool: ...

    def on_rx_start(self, now: int) -> None: ...

    def on_rx_end(self, now: int) -> None: ...

    def on_frame(self, frame: Frame, now: int) -> None: ...

    def on_garbled(self, now: int) -> None: ...

    def on_tx_done(self, tx: "Transmission", now: int) -> None: ...


@dataclass(eq=False)
class Transmission:
    """一次空中传输"""
    sender: int
    frame: Frame
    start: int
    duration: int
    receptions: List["Reception"] = field(default_factory=list)
    end_event: Optional[Event] = None
    aborted: bool = False

    @property
    def end(self) -> int:
        return self.start + self.duration


@dataclass(eq=False)
class Reception:
    """某接收者上的一次接收；eligible 表示开始时正在侦听"""
    tx: Transmission
    receiver: int
    eligible: bool
    overlaps: List[Transmission] = field(default_factory=list)


class WirelessChannel:
    """共享广播信道"""

    def __init__(
        self,
        engine: SimEngine,
        topology: Topology,
        bitrate_bps: int = 250_000,
        p_loss: float = 0.0,
        rng: Optional[RngStream] = None,
        trace=None,
    ):
        self.engine = engine
        self.topology = topology
        self.bitrate_bps = bitrate_bps
        self.p_loss = p_loss
        self.rng = rng
        self.trace = trace
        self._ports: Dict[int, RadioPort] = {}
        self._air: Dict[int, List[Reception]] = {n: [] for n in topology.node_ids}
        self._tx_by_sender: Dict[int, Transmission] = {}
        self._metrics = {
            "transmissions": 0,
            "delivered": 0,
            "collided": 0,
            "erased": 0,
            "aborted": 0,
            "tx_while_off": 0,
        }

    def attach(self, node_id: int, port: RadioPort):
        self._ports[node_id] = port

    def airtime_us(self, frame_bytes: int) -> int:
        """帧空中时间 = ceil(8 × 字节数 / 比特率)"""
        return -(-8 * frame_bytes * 1_000_000 // self.bitrate_bps)

    def is_transmitting(self, node_id: int) -> bool:
        return node_id in self._tx_by_sender

    def get_metrics(self) -> Dict[str, int]:
        return dict(self._metrics)

    def broadcast(self, sender: int, frame: Frame, now: int) -> Optional[Transmission]:
        """向范围内所有节点广播一帧"""
        port = self._ports[sender]
        if not port.is_on:
            self._metrics["tx_while_off"] += 1
            logger.warning(f"节点 {sender} 断电状态下尝试发送 {frame.kind.value}，已忽略")
            if self.trace is not None:
                self.trace.emit(now, sender, TraceKind.TX_WHILE_OFF, frame=frame.kind.value)
            return None
        if sender in self._tx_by_sender:
            raise MacLayerError(
                f"节点 {sender} 正在发送时再次发送",
                details={"node": sender, "at": now},
                error_code="ALREADY_TRANSMITTING",
            )

        # 半双工：开始发送就放弃本节点正在进行的接收
        for rec in self._air[sender]:
            rec.eligible = False

        tx = Transmission(sender, frame, now, self.airtime_us(frame.size_bytes))
        self._tx_by_sender[sender] = tx
        self._metrics["transmissions"] += 1
        ports = self._ports
        for receiver in self.topology.neighbors(sender):
            target = ports.get(receiver)
            rec = Reception(tx, receiver, eligible=target is not None and target.can_receive())
            air = self._air[receiver]
            if air:
                for other in air:
                    other.overlaps.append(tx)
                    rec.overlaps.append(other.tx)
            air.append(rec)
            tx.receptions.append(rec)
            if rec.eligible:
                target.on_rx_start(now)
        tx.end_event = self.engine.schedule(
            tx.end, lambda: self._on_tx_end(tx), priority=PRIO_CHANNEL, kind="tx_end"
        )
        return tx

    def resolve_collisions(self, receiver: int, overlapping: Sequence[Transmission]) -> Optional[Transmission]:
        """恰好一个传输与接收重叠时可投递，否则全部损毁（只影响该接收者）"""
        live = [tx for tx in overlapping if not tx.aborted]
        if len(overlapping) == 1 and live:
            return live[0]
        return None

    def _on_tx_end(self, tx: Transmission):
        now = self.engine.now
        self._tx_by_sender.pop(tx.sender, None)
        sender_port = self._ports[tx.sender]
        sender_port.on_tx_done(tx, now)

        for rec in tx.receptions:
            self._air[rec.receiver].remove(rec)
            if not rec.eligible:
                continue
            port = self._ports[rec.receiver]
            deliverable = self.resolve_collisions(rec.receiver, [tx] + rec.overlaps)
            if deliverable is None:
                self._metrics["collided"] += 1
                port.on_garbled(now)
            elif self.p_loss > 0.0 and self.rng is not None and self.rng.random() < self.p_loss:
                self._metrics["erased"] += 1
            else:
                self._metrics["delivered"] += 1
                port.on_frame(deliverable.frame, now)
            port.on_rx_end(now)

    def node_powered_off(self, node_id: int, now: int):
        """节点断电：中止其发送与接收"""
        for rec in self._air[node_id]:
            rec.eligible = False

        tx = self._tx_by_sender.pop(node_id, None)
        if tx is None:
            return
        tx.aborted = True
        self._metrics["aborted"] += 1
        self.engine.cancel(tx.end_event)
        for rec in tx.receptions:
            self._air[rec.receiver].remove(rec)
            if rec.eligible:
                port = self._ports[rec.receiver]
                port.on_garbled(now)
                port.on_rx_end(now)
