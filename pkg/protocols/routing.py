"""
路由协议（网络层）
上行 ORW 转发、ORPL 路由集合下行扩展，以及任意节点之间的路由。
分组经路由打标签后附加路由集合选项再交给MAC；从MAC收到的分组先剥离选项再处理。
"""

from collections import deque
from dataclasses import dataclass, replace
from typing import Callable, Deque, Dict, List, Optional, Tuple

from core.energy import EnergyModel
from core.engine import Event, SimEngine
from models.packet import (
    Edc,
    ForwarderCriteria,
    FrameKind,
    MetricKind,
    Packet,
    create_downward_criteria,
    create_upward_criteria,
)
from models.scenario import RoutingProtocolKind, RoutingSpec
from models.trace import TraceKind
from protocols.base_layer import ProtocolLayer
from protocols.mac import AnycastAttempt, AnycastOutcome, OpportunisticMac
from protocols.neighbor_table import NeighborTable
from protocols.routing_set import RoutingSetTable
from protocols.routing_table import RoutingTable
from protocols.tlv import attach_routing_set, strip_routing_set
from utils.rng import RngStream

SEQ_MODULO = 0x10000


@dataclass(eq=False)
class QueuedPacket:
    """发送队列条目；packet 不含路由集合选项"""
    packet: Packet
    retries: int = 0
    ready_at: int = 0


class RoutingProtocol(ProtocolLayer):
    """机会路由协议"""

    layer_name = "routing"

    def __init__(
        self,
        node_id: int,
        sink_id: int,
        engine: SimEngine,
        mac: OpportunisticMac,
        energy: EnergyModel,
        neighbors: NeighborTable,
        table: RoutingTable,
        routing_set: Optional[RoutingSetTable],
        spec: RoutingSpec,
        rng: RngStream,
        piggyback_rng: RngStream,
        cpu_time_us: int = 0,
        persist_state: bool = True,
        trace=None,
    ):
        super().__init__(node_id, engine, trace)
        self.sink_id = sink_id
        self.mac = mac
        self.energy = energy
        self.neighbors = neighbors
        self.table = table
        self.routing_set = routing_set
        self.spec = spec
        self.rng = rng
        self.piggyback_rng = piggyback_rng
        self.cpu_time_us = cpu_time_us
        self.persist_state = persist_state
        self.orpl = spec.protocol == RoutingProtocolKind.ORPL and routing_set is not None

        self.queue: Deque[QueuedPacket] = deque()
        self.inflight: Optional[QueuedPacket] = None
        self.last_data_sent_at: Optional[int] = None
        self._seq = 0
        self._pump_event: Optional[Event] = None
        self._last_overheard: Dict[int, tuple] = {}

        # 应用层交付回调 (分组, 完整路径, 时刻)
        self.on_app_deliver: Callable[[Packet, Tuple[int, ...], int], None] = lambda packet, route, now: None

        self._metrics = {
            "originated": 0,
            "delivered": 0,
            "forwarded": 0,
            "attempts": 0,
            "retries": 0,
            "ttl_drops": 0,
            "queue_drops": 0,
            "no_forwarder_drops": 0,
            "power_drops": 0,
            "tlv_malformed": 0,
            "sets_truncated": 0,
        }

        table.add_edc_listener(lambda old, new, now: self.request_pump(now))
        table.add_set_listener(lambda added, now: self.request_pump(now))

    @property
    def is_sink(self) -> bool:
        return self.node_id == self.sink_id

    def next_seq(self) -> int:
        """本节点的分组序号（数据与通告共用）"""
        seq = self._seq
        self._seq = (self._seq + 1) % SEQ_MODULO
        return seq

    def sent_data_since(self, since: int) -> bool:
        return self.last_data_sent_at is not None and self.last_data_sent_at >= since

    # ---- 上电/断电 ----

    def on_power_on(self, now: int):
        self._pump_event = None
        self.request_pump(now)

    def on_power_off(self, now: int):
        """断电：RAM中的队列全部丢失"""
        lost = ([self.inflight] if self.inflight is not None else []) + list(self.queue)
        for item in lost:
            self._drop(item.packet, TraceKind.POWER_DROP, "power_drops", now)
        self.inflight = None
        self.queue.clear()
        self._pump_event = None
        self._last_overheard.clear()
        if not self.persist_state:
            self.neighbors.reset()
            self.table.reset(now)

    # ---- 发起与接收 ----

    def originate(self, dest: int, payload_len: int, now: int) -> Optional[Packet]:
        """应用层发起一个分组；节点断电时返回None"""
        if not self.is_on:
            return None
        seq = self.next_seq()
        packet = Packet(
            origin=self.node_id,
            final_dest=dest,
            seq=seq,
            ttl=self.spec.ttl_default,
            payload_len=payload_len,
            criteria=create_upward_criteria(self.node_id, seq, self.table.own_edc),
            created_at=now,
        )
        criteria = self.tag(packet, now)
        if criteria is not None:
            packet = packet.with_criteria(criteria)
        self._metrics["originated"] += 1
        if self.trace is not None:
            self.trace.emit(
                now, self.node_id, TraceKind.ORIGINATE, origin=self.node_id, pseq=seq, dest=dest,
                metric=None if criteria is None else criteria.metric.value, payload_len=payload_len,
            )
        self.energy.charge_cpu(now, self.cpu_time_us)
        self._enqueue(QueuedPacket(packet), now)
        return packet

    def on_accepted(self, packet: Packet, sender: int, now: int):
        """MAC确认接受后交付上来：本节点是目的就交付，否则重新打标签转发"""
        # 集合内容已在侦听时合并，这里只剥离
        packet, _ = strip_routing_set(packet)
        self.energy.charge_cpu(now, self.cpu_time_us)
        if packet.final_dest == self.node_id:
            route = packet.hops + (self.node_id,)
            self._metrics["delivered"] += 1
            if self.trace is not None:
                self.trace.emit(
                    now, self.node_id, TraceKind.DELIVER, origin=packet.origin, pseq=packet.seq,
                    dest=packet.final_dest, src=sender, hops=list(route), edc_tags=list(packet.edc_tags),
                    latency_us=now - packet.created_at, metric=packet.criteria.metric.value,
                )
            self.on_app_deliver(packet, route, now)
            return

        ttl = packet.ttl - 1
        if ttl <= 0:
            self._drop(packet, TraceKind.TTL_DROP, "ttl_drops", now)
            return
        self._metrics["forwarded"] += 1
        self._enqueue(QueuedPacket(replace(packet, ttl=ttl)), now)

    def on_routing_overheard(self, peer: int, packet: Packet, kind: FrameKind, now: int):
        """侦听到的选通或通告：剥离集合、更新对端EDC、合并集合"""
        edc_tag = packet.criteria.sender_edc
        train = (kind.value, packet.origin, packet.seq, None if edc_tag is None else edc_tag.value)
        if self._last_overheard.get(peer) == train:
            return
        self._last_overheard[peer] = train

        def on_malformed(error):
            self._metrics["tlv_malformed"] += 1
            self.logger.warning(f"来自 {peer} 的路由集合选项损坏: {error.error_message}", now)
            if self.trace is not None:
                self.trace.emit(
                    now, self.node_id, TraceKind.TLV_MALFORMED, src=peer, origin=packet.origin,
                    pseq=packet.seq, error=error.error_message,
                )

        stripped, routing_set = strip_routing_set(packet, on_malformed)
        criteria = stripped.criteria
        edc = criteria.sender_edc if criteria.metric == MetricKind.UPWARD_EDC else None
        if not self.orpl:
            routing_set = None
        self.table.on_routing_overheard(peer, edc, routing_set, now)

    # ---- 打标签 ----

    def tag(self, packet: Packet, now: int) -> Optional[ForwarderCriteria]:
        """按当前路由状态选择转发准则；无路由返回None"""
        dest = packet.final_dest
        own = self.table.own_edc
        if dest == self.sink_id:
            if not own.is_finite:
                return None
            cost = self._bounded(self.table.calculate_upwards_cost(dest), packet)
            return create_upward_criteria(packet.origin, packet.seq, cost)
        if self.is_sink or self.table.holds(dest, now):
            return create_downward_criteria(packet.origin, packet.seq, dest)
        if own.is_finite:
            # 任意节点之间：先上行，遇到持有目的地址的节点再转下行
            return ForwarderCriteria(
                metric=MetricKind.UPWARD_EDC,
                origin=packet.origin,
                packet_seq=packet.seq,
                sender_edc=self._bounded(own, packet),
                final_dest=dest,
            )
        return None

    def _bounded(self, own: Edc, packet: Packet) -> Edc:
        """转发的上行标签不超过上一跳标签减 margin（接受后本节点EDC可能已上升）"""
        if not packet.edc_tags:
            return own
        cap = packet.edc_tags[-1] - self.spec.margin
        if own.value > cap:
            return Edc.of(max(0.0, cap))
        return own

    # ---- 队列 ----

    def _enqueue(self, item: QueuedPacket, now: int, front: bool = False):
        if len(self.queue) >= self.spec.queue_cap:
            oldest = self.queue.popleft()
            self._drop(oldest.packet, TraceKind.QUEUE_DROP, "queue_drops", now)
        if front:
            self.queue.appendleft(item)
        else:
            self.queue.append(item)
        self.request_pump(now)

    def _drop(self, packet: Packet, kind: TraceKind, counter: str, now: int):
        self._metrics[counter] += 1
        if self.trace is not None:
            self.trace.emit(
                now, self.node_id, kind, origin=packet.origin, pseq=packet.seq, dest=packet.final_dest,
                ttl=packet.ttl,
            )

    def request_pump(self, at: int):
        """在 at 时刻（或更早已排好的时刻）尝试发送队首可路由的分组"""
        if not self.is_powered:
            return
        at = max(at, self.engine.now)
        event = self._pump_event
        if event is not None and event.pending:
            if event.fire_at <= at:
                return
            self.engine.cancel(event)
        self._pump_event = self.schedule_timer(at, self._pump, "routing_pump")

    def _pump(self):
        now = self.engine.now
        self._pump_event = None
        if not self.is_on or self.inflight is not None or not self.mac.is_idle() or not self.queue:
            return

        if self.energy.intermittent:
            reserve = self.mac.send_reserve_fj
            if self.energy.headroom_fj(now) < reserve:
                wait = self.energy.time_until_headroom(reserve, now)
                self.request_pump(now + max(1, wait if wait is not None else self.mac.wake_us))
                return

        chosen = None
        next_ready = None
        for item in self.queue:
            if item.ready_at > now:
                next_ready = item.ready_at if next_ready is None else min(next_ready, item.ready_at)
                continue
            criteria = self.tag(item.packet, now)
            if criteria is not None:
                chosen = (item, criteria)
                break
        if chosen is None:
            # 无路由的分组留在队列里，路由出现时由监听器唤醒
            if next_ready is not None:
                self.request_pump(next_ready)
            return

        item, criteria = chosen
        self.queue.remove(item)
        self._send(item, criteria, now)

    def _send(self, item: QueuedPacket, criteria: ForwarderCriteria, now: int):
        packet = item.packet
        tags = packet.edc_tags
        if criteria.metric == MetricKind.UPWARD_EDC:
            tags = tags + (criteria.sender_edc.value,)
        outgoing = replace(packet, criteria=criteria, hops=packet.hops + (self.node_id,), edc_tags=tags)
        if self.orpl:
            advertised, truncated = self.routing_set.advertised(now)
            if truncated:
                self._metrics["sets_truncated"] += 1
                if self.trace is not None:
                    self.trace.emit(now, self.node_id, TraceKind.SET_TRUNCATED, size=len(advertised))
            outgoing = attach_routing_set(outgoing, advertised, self.piggyback_rng, self.spec.p_piggyback)

        defer_candidates = None
        if criteria.metric == MetricKind.DOWNWARD_SET and criteria.final_dest != self.node_id:
            via = self.routing_set.via(criteria.final_dest) if self.routing_set is not None else None
            defer_candidates = [via] if via is not None else []

        self.inflight = item
        self.last_data_sent_at = now
        self._metrics["attempts"] += 1
        self.mac.send_anycast(outgoing, criteria, now, defer_candidates)

    def on_attempt_done(self, attempt: AnycastAttempt, now: int):
        """MAC尝试结束（断电导致的中止在 on_power_off 里处理）"""
        item = self.inflight
        self.inflight = None
        if item is None:
            return
        if attempt.outcome == AnycastOutcome.FORWARDED:
            return
        if attempt.outcome == AnycastOutcome.NO_FORWARDER:
            self._report_failures(attempt, now)
            item.retries += 1
            if item.retries > self.spec.max_retries:
                self._drop(item.packet, TraceKind.NO_FORWARDER_DROP, "no_forwarder_drops", now)
                self.request_pump(now)
                return
            self._metrics["retries"] += 1
            backoff = self.rng.uniform(0.5, 1.5) * self.mac.wake_us
            item.ready_at = now + int(backoff)
        else:
            # 选通中能量见底：放回队首，等能量余量恢复
            item.ready_at = now
        self._enqueue(item, now, front=True)

    def _report_failures(self, attempt: AnycastAttempt, now: int):
        criteria = attempt.criteria
        if criteria is not None and criteria.metric == MetricKind.DOWNWARD_SET:
            via = self.routing_set.via(criteria.final_dest) if self.routing_set is not None else None
            peers: List[int] = [via] if via is not None else []
        else:
            peers = list(self.table.forwarder_set)
        for peer in peers:
            self.neighbors.record_failure(peer)
        if peers:
            self.table.recompute(now)

    @property
    def is_on(self) -> bool:
        return self.is_powered and self.energy.is_on

    def get_metrics(self) -> Dict[str, int]:
        metrics = dict(self._metrics)
        metrics["queue_len"] = len(self.queue)
        return metrics
