"""
朴素邻居发现
周期性广播携带本节点EDC（以及按概率附带路由集合）的通告帧串；
近期发送过数据时抑制通告，路由状态变化时触发一次额外通告
"""

from typing import List, Optional

from core.engine import Event, SimEngine, s_to_us
from models.packet import BROADCAST_ADDR, Edc, Packet, create_upward_criteria
from models.scenario import RoutingSpec
from models.trace import TraceKind
from protocols.base_layer import ProtocolLayer
from protocols.mac import AnycastAttempt, OpportunisticMac
from protocols.routing import RoutingProtocol
from protocols.tlv import attach_routing_set
from utils.rng import RngStream


class Discovery(ProtocolLayer):
    """通告发现协议"""

    layer_name = "discovery"

    def __init__(
        self,
        node_id: int,
        engine: SimEngine,
        mac: OpportunisticMac,
        routing: RoutingProtocol,
        spec: RoutingSpec,
        rng: RngStream,
        trace=None,
    ):
        super().__init__(node_id, engine, trace)
        self.mac = mac
        self.routing = routing
        self.table = routing.table
        self.routing_set = routing.routing_set
        self.spec = spec
        self.rng = rng
        self.adv_interval_us = s_to_us(spec.adv_interval_s)
        self.trigger_gap_us = self.adv_interval_us // 10

        self.pending = False
        self._trigger_event: Optional[Event] = None
        self._last_triggered: Optional[int] = None

        self._metrics = {
            "advertisements": 0,
            "triggered": 0,
            "suppressed": 0,
            "energy_skipped": 0,
        }

        self.table.add_edc_listener(self._on_edc_change)
        self.table.add_set_listener(self._on_set_growth)

    def on_power_on(self, now: int):
        self.pending = False
        self._trigger_event = None
        if self.routing.is_sink:
            first = now + int(self.rng.uniform(0.0, self.trigger_gap_us))
        else:
            first = now + self._jittered_interval()
        self.schedule_timer(first, self._on_periodic, "adv_periodic")

    def on_power_off(self, now: int):
        self.pending = False
        self._trigger_event = None

    def _jittered_interval(self) -> int:
        return int(self.rng.uniform(0.9, 1.1) * self.adv_interval_us)

    def _on_periodic(self):
        now = self.engine.now
        self.schedule_timer(now + self._jittered_interval(), self._on_periodic, "adv_periodic")
        if self.routing_set is not None:
            self.routing_set.expire(now)
        if self.routing.sent_data_since(now - self.adv_interval_us):
            # 近期的数据分组已经携带了路由状态
            self._metrics["suppressed"] += 1
            if self.trace is not None:
                self.trace.emit(now, self.node_id, TraceKind.ADV_SUPPRESSED, reason="recent_data")
            return
        self.advertise(now)

    def _on_edc_change(self, old: Edc, new: Edc, now: int):
        if not old.is_finite and new.is_finite:
            self.trigger(now)

    def _on_set_growth(self, added: List[int], now: int):
        if added:
            self.trigger(now)

    def trigger(self, now: int):
        """路由状态变化后的额外通告，每 adv_interval/10 至多一次"""
        if not self.spec.adv_on_change or not self.is_powered:
            return
        if self._trigger_event is not None and self._trigger_event.pending:
            return
        at = now + int(self.rng.uniform(0.0, self.trigger_gap_us))
        if self._last_triggered is not None:
            at = max(at, self._last_triggered + self.trigger_gap_us)
        self._trigger_event = self.schedule_timer(at, self._on_trigger, "adv_triggered")

    def _on_trigger(self):
        now = self.engine.now
        self._trigger_event = None
        self._last_triggered = now
        self._metrics["triggered"] += 1
        self.advertise(now)

    def advertise(self, now: int):
        """广播一串通告；MAC忙时等到空闲再发"""
        if not self.is_powered or not self.routing.is_on:
            return
        if not self.mac.is_idle():
            self.pending = True
            return
        self.pending = False
        energy = self.routing.energy
        if energy.intermittent and energy.headroom_fj(now) < self.mac.send_reserve_fj:
            self._metrics["energy_skipped"] += 1
            if self.trace is not None:
                self.trace.emit(now, self.node_id, TraceKind.ADV_SUPPRESSED, reason="energy")
            return

        seq = self.routing.next_seq()
        packet = Packet(
            origin=self.node_id,
            final_dest=BROADCAST_ADDR,
            seq=seq,
            ttl=1,
            payload_len=0,
            criteria=create_upward_criteria(self.node_id, seq, self.table.own_edc),
            created_at=now,
        )
        if self.routing.orpl:
            advertised, truncated = self.routing_set.advertised(now)
            if truncated and self.trace is not None:
                self.trace.emit(now, self.node_id, TraceKind.SET_TRUNCATED, size=len(advertised))
            packet = attach_routing_set(packet, advertised, self.routing.piggyback_rng, self.spec.p_piggyback)
        energy.charge_cpu(now, self.routing.cpu_time_us)
        self._metrics["advertisements"] += 1
        self.mac.send_broadcast(packet, now)

    def flush(self, now: int) -> bool:
        """MAC空闲时发出被推迟的通告；返回是否发出"""
        if not self.pending:
            return False
        self.advertise(now)
        return not self.pending and self.mac.attempt is not None and self.mac.attempt.broadcast

    def on_broadcast_done(self, attempt: AnycastAttempt, now: int):
        self.logger.debug(f"通告完成，共 {attempt.strobes_sent} 帧", now)

    def get_metrics(self):
        return dict(self._metrics)
