"""
机会单播MAC（IOpportunisticLinkLayer）
占空比侦听窗口 + 发送方连续选通；接收方在竞争前向路由层发起接受查询，
ACK 协商唯一转发者，并向邻居表发出相遇信号
"""

from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Set, Tuple

from core.channel import Transmission, WirelessChannel
from core.energy import Activity, EnergyModel, mj_to_fj
from core.engine import Event, SimEngine, s_to_us
from core.errors import MacLayerError
from models.packet import (
    MAC_HEADER_BYTES,
    ForwarderCriteria,
    Frame,
    FrameKind,
    Packet,
    create_ack_frame,
    create_advertisement_frame,
    create_strobe_frame,
)
from models.scenario import MacSpec
from models.signals import (
    EncounterSignal,
    create_coincidental_signal,
    create_expected_signal,
    create_period_end_signal,
)
from models.trace import TraceKind
from protocols.base_layer import ProtocolLayer
from protocols.interfaces import (
    DeferDecision,
    IDeferTransmission,
    IForwardingJudge,
    NoDeferral,
    RoutingListener,
)
from utils.rng import RngStream
from utils.signal_bus import SignalBus


class AnycastOutcome(str, Enum):
    """任播尝试结果"""
    FORWARDED = "FORWARDED"
    NO_FORWARDER = "NO_FORWARDER"
    ABORTED_ENERGY = "ABORTED_ENERGY"
    BROADCAST_DONE = "BROADCAST_DONE"


# 侦听原因
LISTEN_WINDOW = "window"
LISTEN_ACK_WAIT = "ack_wait"
LISTEN_ACCEPTOR = "acceptor"


@dataclass(eq=False)
class AnycastAttempt:
    """一次任播（或通告广播）尝试"""
    packet: Packet
    criteria: Optional[ForwarderCriteria]
    requested_at: int
    max_duration: int
    broadcast: bool = False
    started: Optional[int] = None
    strobes_sent: int = 0
    contention_flag: bool = False
    ack_collisions: int = 0
    gap_garbled: bool = False
    defer: Optional[DeferDecision] = None
    defer_candidates: Optional[List[int]] = None
    outcome: Optional[AnycastOutcome] = None
    forwarder: Optional[int] = None
    ended_at: Optional[int] = None

    @property
    def strobing(self) -> bool:
        return self.started is not None and self.outcome is None

    @property
    def deferring(self) -> bool:
        """已请求、尚未开始选通；此期间节点照常侦听和接受"""
        return self.started is None and self.outcome is None and not self.broadcast

    @property
    def duration(self) -> int:
        if self.started is None or self.ended_at is None:
            return 0
        return self.ended_at - self.started


@dataclass(eq=False)
class PendingAccept:
    """接收方已接受、等待确认的分组"""
    sender: int
    strobe: Frame
    criteria: ForwarderCriteria
    due_seq: int
    started: int
    acked: bool = False
    deadline_event: Optional[Event] = None

    def matches(self, sender: int, packet_id: Tuple[int, int]) -> bool:
        return self.sender == sender and self.criteria.packet_id == packet_id


class OpportunisticMac(ProtocolLayer):
    """选通式低功耗侦听任播MAC"""

    layer_name = "mac"

    def __init__(
        self,
        node_id: int,
        engine: SimEngine,
        channel: WirelessChannel,
        energy: EnergyModel,
        spec: MacSpec,
        phase_rng: RngStream,
        backoff_rng: RngStream,
        signal_bus: SignalBus,
        deferrer: Optional[IDeferTransmission] = None,
        intermittent: bool = True,
        trace=None,
        trace_signals: bool = True,
    ):
        super().__init__(node_id, engine, trace)
        self.channel = channel
        self.energy = energy
        self.signal_bus = signal_bus
        self.deferrer: IDeferTransmission = deferrer if deferrer is not None else NoDeferral()
        self.intermittent = intermittent
        self.trace_signals = trace_signals
        self.backoff_rng = backoff_rng

        self.wake_us = s_to_us(spec.wake_interval_s)
        self.listen_us = s_to_us(spec.listen_len_s)
        self.ack_window_us = s_to_us(spec.ack_window_s)
        self.max_duration_us = s_to_us(spec.max_duration_s)
        self.turnaround_us = s_to_us(spec.turnaround_s)
        self.adv_duration_us = self.wake_us + self.listen_us
        self.backoff_slots = spec.backoff_slots
        self.accept_reserve_fj = mj_to_fj(spec.accept_reserve_mj)
        self.send_reserve_fj = mj_to_fj(spec.send_reserve_mj)
        self.strobe_guard_fj = mj_to_fj(spec.strobe_guard_mj)
        self.accepted_cache_size = spec.accepted_cache

        # 相位在首次上电前抽取一次，跨断电保持
        self.phase_us = phase_rng.integers(0, self.wake_us)

        # 由节点装配时接线
        self.judge: Optional[IForwardingJudge] = None
        self.on_deliver: Callable[[Packet, int, int], None] = lambda packet, sender, now: None
        self.on_attempt_done: Callable[[AnycastAttempt, int], None] = lambda attempt, now: None
        self.on_idle: Callable[[int], None] = lambda now: None
        self._routing_listeners: List[RoutingListener] = []

        self._listen: Set[str] = set()
        self._rx_active = 0
        self._tx: Optional[Transmission] = None
        self._window_open = False
        self._window_peer: Optional[int] = None
        self._window_close_event: Optional[Event] = None
        self._attempt: Optional[AnycastAttempt] = None
        self._attempt_event: Optional[Event] = None
        self._pending: Optional[PendingAccept] = None
        self._ack_event: Optional[Event] = None
        self._accepted: "OrderedDict[Tuple[int, int, int], None]" = OrderedDict()

        self._metrics: Dict[str, object] = {
            "windows": 0,
            "windows_skipped": 0,
            "strobes": 0,
            "adv_strobes": 0,
            "acks_sent": 0,
            "reacks": 0,
            "accept_queries": 0,
            "accepts": 0,
            "rejects": 0,
            "judge_errors": 0,
            "busy_ignored": 0,
            "low_energy_ignored": 0,
            "abandoned": 0,
            "delivered_up": 0,
            "forwarded_strobes": 0,
            "outcomes": {o.value: 0 for o in AnycastOutcome},
        }

    # ---- 接口 ----

    def add_link_listener(self, listener: Callable[[EncounterSignal], None]):
        """ILinkOverhearingSource"""
        self.signal_bus.subscribe_all(listener)

    def add_routing_listener(self, listener: RoutingListener):
        """IRoutingOverhearingSource"""
        self._routing_listeners.append(listener)

    @property
    def is_on(self) -> bool:
        return self.is_powered and self.energy.is_on

    def is_idle(self) -> bool:
        return self._attempt is None and self._pending is None and self._tx is None and self._ack_event is None

    @property
    def attempt(self) -> Optional[AnycastAttempt]:
        return self._attempt

    def can_receive(self) -> bool:
        return self.is_on and self._tx is None and bool(self._listen)

    # ---- 射频状态与能量 ----

    def _update_radio(self, now: int):
        if not self.is_on:
            return
        if self._tx is not None:
            activity = Activity.TX
        elif self._rx_active > 0:
            activity = Activity.RX
        elif self._listen:
            activity = Activity.IDLE_LISTEN
        else:
            activity = Activity.SLEEP
        self.energy.set_activity(activity, now)

    def _emit(self, signal: EncounterSignal):
        self.signal_bus.publish(signal)
        if self.trace is not None and self.trace_signals and signal.peer is not None:
            self.trace.emit(signal.at, self.node_id, TraceKind.SIGNAL, sig=signal.kind.value, peer=signal.peer)

    def _maybe_idle(self, now: int):
        if self.is_on and self.is_idle():
            self.on_idle(now)

    # ---- 上电/断电 ----

    def on_power_on(self, now: int):
        self._listen.clear()
        self._rx_active = 0
        self._tx = None
        self._window_open = False
        self._schedule_window(now)
        self._update_radio(now)

    def on_power_off(self, now: int):
        # 节点定时器已由节点统一取消
        if self._window_open:
            self._window_open = False
            self._emit(create_period_end_signal(now, self._window_peer))
        attempt = self._attempt
        if attempt is not None:
            self._attempt = None
            self._record_outcome(attempt, AnycastOutcome.ABORTED_ENERGY, now)
        pending = self._pending
        if pending is not None:
            self._pending = None
            self._release(pending)
        self._listen.clear()
        self._rx_active = 0
        self._tx = None
        self._window_close_event = None
        self._attempt_event = None
        self._ack_event = None

    # ---- 唤醒调度 ----

    def wakeup_schedule(self, now: int) -> int:
        """不早于 now 的下一个侦听窗口起点"""
        if now <= self.phase_us:
            return self.phase_us
        k = -(-(now - self.phase_us) // self.wake_us)
        return self.phase_us + k * self.wake_us

    def _schedule_window(self, now: int):
        self.schedule_timer(self.wakeup_schedule(now), self._on_window_open, "window_open")

    def _on_window_open(self):
        now = self.engine.now
        self.schedule_timer(now + self.wake_us, self._on_window_open, "window_open")
        if self._attempt is not None and self._attempt.started is not None:
            self._metrics["windows_skipped"] += 1
            return
        self._window_open = True
        self._window_peer = None
        self._metrics["windows"] += 1
        self._listen.add(LISTEN_WINDOW)
        self._window_close_event = self.schedule_timer(now + self.listen_us, self._on_window_close, "window_close")
        self._update_radio(now)

    def _on_window_close(self):
        self._window_close_event = None
        self._close_window(self.engine.now)

    def _close_window(self, now: int):
        """关闭侦听窗口，每个窗口恰好发出一次窗口结束信号"""
        if not self._window_open:
            return
        self._window_open = False
        self.engine.cancel(self._window_close_event)
        self._window_close_event = None
        self._listen.discard(LISTEN_WINDOW)
        self._emit(create_period_end_signal(now, self._window_peer))
        self._update_radio(now)

    # ---- 发送方 ----

    def send_anycast(
        self,
        packet: Packet,
        criteria: ForwarderCriteria,
        now: int,
        defer_candidates: Optional[List[int]] = None,
    ) -> AnycastAttempt:
        """发起一次任播尝试"""
        if self._attempt is not None:
            raise MacLayerError(
                f"节点 {self.node_id} 已有进行中的尝试",
                details={"node": self.node_id, "at": now},
            )
        if not self.is_on:
            raise MacLayerError(f"节点 {self.node_id} 断电时发起尝试", error_code="NODE_OFF")
        if packet.criteria != criteria:
            packet = packet.with_criteria(criteria)
        attempt = AnycastAttempt(
            packet, criteria, requested_at=now, max_duration=self.max_duration_us, defer_candidates=defer_candidates
        )
        self._attempt = attempt
        self.energy.sample(now, "attempt_start")
        self._schedule_start(attempt, now)
        return attempt

    def _schedule_start(self, attempt: AnycastAttempt, now: int):
        """按唤醒预测推迟选通，或立即开始"""
        attempt.defer = self.deferrer.should_defer(None, now, attempt.defer_candidates)
        if attempt.defer.defer_for > 0:
            self._attempt_event = self.schedule_timer(
                now + attempt.defer.defer_for, lambda: self._begin_strobing(self.engine.now), "defer"
            )
        else:
            self._begin_strobing(now)

    def _resume_deferred(self, now: int):
        """接收方工作结束后继续被搁置的推迟尝试"""
        attempt = self._attempt
        if attempt is None or not attempt.deferring or self._attempt_event is not None:
            return
        if self.is_on:
            self._schedule_start(attempt, now)

    def send_broadcast(self, packet: Packet, now: int) -> AnycastAttempt:
        """通告帧串：持续 wake_interval + listen_len，无ACK"""
        if self._attempt is not None:
            raise MacLayerError(f"节点 {self.node_id} 已有进行中的尝试", details={"node": self.node_id})
        attempt = AnycastAttempt(packet, None, requested_at=now, max_duration=self.adv_duration_us, broadcast=True)
        self._attempt = attempt
        if self.trace is not None:
            self.trace.emit(
                now, self.node_id, TraceKind.ADV_TRAIN, pseq=packet.seq, duration_us=self.adv_duration_us,
                bytes=MAC_HEADER_BYTES + packet.size_bytes,
            )
        self._begin_strobing(now)
        return attempt

    def _begin_strobing(self, now: int):
        attempt = self._attempt
        self._attempt_event = None
        if attempt is None:
            return
        if not attempt.broadcast:
            if self._pending is not None:
                # 正在接受别人的分组，确认或撤销后再开始
                return
            busy_until = self._tx.end if self._tx is not None else None
            if busy_until is None and self._ack_event is not None:
                busy_until = self._ack_event.fire_at
            if busy_until is not None:
                self._attempt_event = self.schedule_timer(
                    busy_until, lambda: self._begin_strobing(self.engine.now), "defer"
                )
                return
        self._close_window(now)
        attempt.started = now
        self._send_strobe(now)

    def _send_strobe(self, now: int):
        attempt = self._attempt
        self._attempt_event = None
        if attempt is None:
            return
        if self._tx is not None:
            self._attempt_event = self.schedule_timer(self._tx.end, lambda: self._send_strobe(self.engine.now), "strobe")
            return
        packet = attempt.packet
        airtime = self.channel.airtime_us(MAC_HEADER_BYTES + packet.size_bytes)
        elapsed = now - attempt.started
        if attempt.broadcast:
            if attempt.strobes_sent > 0 and elapsed + airtime > self.adv_duration_us:
                self._finish_attempt(AnycastOutcome.BROADCAST_DONE, now)
                return
            frame = create_advertisement_frame(self.node_id, packet, attempt.strobes_sent)
            self._metrics["adv_strobes"] += 1
        else:
            # 上一个 ACK 间隙出现碰撞时，接受方都以为自己被选中；必须再发带竞争标志的选通
            overrun = elapsed + airtime + self.ack_window_us > attempt.max_duration
            if attempt.strobes_sent > 0 and overrun and not attempt.gap_garbled:
                self._finish_attempt(AnycastOutcome.NO_FORWARDER, now)
                return
            if self.intermittent and self.strobe_guard_fj > 0 and self.energy.headroom_fj(now) < self.strobe_guard_fj:
                self._finish_attempt(AnycastOutcome.ABORTED_ENERGY, now)
                return
            frame = create_strobe_frame(self.node_id, packet, attempt.strobes_sent, attempt.contention_flag)
            self._metrics["strobes"] += 1
            if self.trace is not None:
                self.trace.emit(
                    now, self.node_id, TraceKind.MAC_STROBE, seq=frame.strobe_seq, origin=packet.origin,
                    pseq=packet.seq, flag=frame.contention_flag, bytes=frame.size_bytes,
                )
        attempt.strobes_sent += 1
        self._transmit(frame, now)

    def _transmit(self, frame: Frame, now: int) -> Optional[Transmission]:
        tx = self.channel.broadcast(self.node_id, frame, now)
        if tx is None:
            return None
        self._tx = tx
        # 半双工：开始发送即放弃正在进行的接收
        self._rx_active = 0
        self._update_radio(now)
        return tx

    def on_tx_done(self, tx: Transmission, now: int):
        self._tx = None
        attempt = self._attempt
        kind = tx.frame.kind
        if kind == FrameKind.DATA_STROBE and attempt is not None and not attempt.broadcast:
            attempt.gap_garbled = False
            self._listen.add(LISTEN_ACK_WAIT)
            self._attempt_event = self.schedule_timer(now + self.ack_window_us, self._on_ack_gap_end, "ack_gap")
        elif kind == FrameKind.ADVERTISEMENT and attempt is not None and attempt.broadcast:
            self._attempt_event = self.schedule_timer(
                now + self.ack_window_us, lambda: self._send_strobe(self.engine.now), "adv_gap"
            )
        elif kind == FrameKind.ACK:
            pending = self._pending
            ref = tx.frame.ack_ref
            if pending is not None and pending.matches(ref.dest, (ref.origin, ref.packet_seq)):
                pending.acked = True
        self._update_radio(now)
        self._maybe_idle(now)

    def _on_ack_gap_end(self):
        now = self.engine.now
        self._attempt_event = None
        self._listen.discard(LISTEN_ACK_WAIT)
        attempt = self._attempt
        if attempt is None:
            return
        if attempt.gap_garbled:
            # 听到能量但没有可解码的ACK：多个接收方同时应答
            attempt.contention_flag = True
            attempt.ack_collisions += 1
        self._send_strobe(now)

    def _record_outcome(self, attempt: AnycastAttempt, outcome: AnycastOutcome, now: int, forwarder=None):
        attempt.outcome = outcome
        attempt.forwarder = forwarder
        attempt.ended_at = now
        self._metrics["outcomes"][outcome.value] += 1
        if outcome == AnycastOutcome.FORWARDED:
            self._metrics["forwarded_strobes"] += attempt.strobes_sent
        if self.trace is not None:
            self.trace.emit(
                now, self.node_id, TraceKind.MAC_OUTCOME, outcome=outcome.value, origin=attempt.packet.origin,
                pseq=attempt.packet.seq, to=forwarder, strobes=attempt.strobes_sent,
                duration_us=attempt.duration, broadcast=attempt.broadcast, collisions=attempt.ack_collisions,
            )

    def _finish_attempt(self, outcome: AnycastOutcome, now: int, forwarder: Optional[int] = None):
        attempt = self._attempt
        self._attempt = None
        self.engine.cancel(self._attempt_event)
        self._attempt_event = None
        self._listen.discard(LISTEN_ACK_WAIT)
        self._record_outcome(attempt, outcome, now, forwarder)
        self._update_radio(now)
        self.energy.sample(now, "attempt_end")
        self.on_attempt_done(attempt, now)
        self._maybe_idle(now)

    # ---- 接收方 ----

    def on_rx_start(self, now: int):
        self._rx_active += 1
        self._update_radio(now)

    def on_rx_end(self, now: int):
        self._rx_active = max(0, self._rx_active - 1)
        self._update_radio(now)

    def on_garbled(self, now: int):
        attempt = self._attempt
        if attempt is not None and LISTEN_ACK_WAIT in self._listen:
            attempt.gap_garbled = True
        pending = self._pending
        if pending is not None and now - pending.started <= self.max_duration_us:
            # 可能是没解出的重复选通，延长确认期限
            self._arm_deadline(pending, now)

    def on_frame(self, frame: Frame, now: int):
        """收到可解码的帧"""
        if not self.is_on:
            return
        if frame.kind == FrameKind.ACK:
            self._on_ack(frame, now)
            return
        self._window_peer = frame.src
        self._emit(create_coincidental_signal(frame.src, frame, now))
        for listener in self._routing_listeners:
            listener(frame.src, frame.packet, frame.kind, now)
        if frame.kind == FrameKind.ADVERTISEMENT:
            # 通告已收到，提前休眠
            if self._pending is None:
                self._close_window(now)
            return
        self._on_strobe(frame, now)

    def _on_ack(self, frame: Frame, now: int):
        ref = frame.ack_ref
        attempt = self._attempt
        if (
            attempt is not None
            and attempt.strobing
            and not attempt.broadcast
            and ref.dest == self.node_id
            and (ref.origin, ref.packet_seq) == attempt.packet.packet_id
        ):
            self._emit(create_expected_signal(frame.acker, frame, now))
            self._finish_attempt(AnycastOutcome.FORWARDED, now, forwarder=frame.acker)
            return
        self._window_peer = frame.acker
        self._emit(create_coincidental_signal(frame.acker, frame, now))
        pending = self._pending
        if pending is not None and frame.acker != self.node_id and pending.matches(ref.dest, (ref.origin, ref.packet_seq)):
            # 别的接收方已经拿到这个分组
            self._abandon(pending, now)

    def _on_strobe(self, frame: Frame, now: int):
        packet = frame.packet
        pending = self._pending
        if pending is not None:
            if pending.matches(frame.src, packet.packet_id):
                self._on_repeat_strobe(pending, frame, now)
            return
        if self._attempt is not None and not self._attempt.deferring:
            self._metrics["busy_ignored"] += 1
            self._close_window(now)
            return
        key = (frame.src, packet.origin, packet.seq)
        if key in self._accepted:
            # 已确认过：重复ACK，不再交付
            self._metrics["reacks"] += 1
            self._schedule_ack(frame, now)
            return
        if self.intermittent and self.energy.headroom_fj(now) < self.accept_reserve_fj:
            self._metrics["low_energy_ignored"] += 1
            self._close_window(now)
            return
        if not self._query_judge(frame, now):
            self._close_window(now)
            return

        slot = self.backoff_rng.integers(0, self.backoff_slots) if frame.contention_flag else 0
        pending = PendingAccept(
            sender=frame.src,
            strobe=frame,
            criteria=packet.criteria,
            due_seq=frame.strobe_seq + slot,
            started=now,
        )
        self._pending = pending
        self._listen.add(LISTEN_ACCEPTOR)
        if slot == 0:
            self._schedule_ack(frame, now)
        self._arm_deadline(pending, now)
        self._update_radio(now)

    def _on_repeat_strobe(self, pending: PendingAccept, frame: Frame, now: int):
        pending.strobe = frame
        if pending.acked:
            # 发送方没有收到我们的ACK
            pending.acked = False
            slot = self.backoff_rng.integers(0, self.backoff_slots) if frame.contention_flag else 0
            pending.due_seq = frame.strobe_seq + slot
        if frame.strobe_seq >= pending.due_seq and self._ack_event is None:
            self._schedule_ack(frame, now)
        self._arm_deadline(pending, now)

    def _query_judge(self, frame: Frame, now: int) -> bool:
        """同步接受查询；查询异常按拒绝处理"""
        packet = frame.packet
        self._metrics["accept_queries"] += 1
        verdict = False
        if self.judge is not None:
            try:
                verdict = bool(self.judge.judge(packet.criteria, now, frame.src))
            except Exception as e:
                self._metrics["judge_errors"] += 1
                self.record_error(e)
                self.logger.error(f"接受查询失败，按拒绝处理: {e}", now)
                verdict = False
        self._metrics["accepts" if verdict else "rejects"] += 1
        if self.trace is not None:
            self.trace.emit(
                now, self.node_id, TraceKind.MAC_ACCEPT_QUERY, src=frame.src, origin=packet.origin,
                pseq=packet.seq, verdict=verdict,
            )
        return verdict

    def _schedule_ack(self, strobe: Frame, now: int):
        if self._ack_event is not None:
            return
        self._ack_event = self.schedule_timer(now + self.turnaround_us, lambda: self._send_ack(strobe), "ack")

    def _send_ack(self, strobe: Frame):
        now = self.engine.now
        self._ack_event = None
        if not self.is_on or self._tx is not None:
            self._maybe_idle(now)
            return
        frame = create_ack_frame(self.node_id, strobe)
        self._metrics["acks_sent"] += 1
        if self.trace is not None:
            self.trace.emit(
                now, self.node_id, TraceKind.MAC_ACK, to=strobe.src, origin=frame.ack_ref.origin,
                pseq=frame.ack_ref.packet_seq, seq=strobe.strobe_seq,
            )
        self._transmit(frame, now)

    def _arm_deadline(self, pending: PendingAccept, strobe_end: int):
        """下一次选通应当在 ack_window + 选通空中时间 内到达，再留半个 ack_window 余量"""
        self.engine.cancel(pending.deadline_event)
        strobe_air = self.channel.airtime_us(pending.strobe.size_bytes)
        at = strobe_end + self.ack_window_us + strobe_air + self.ack_window_us // 2
        pending.deadline_event = self.schedule_timer(at, lambda: self._on_accept_deadline(pending), "accept_deadline")

    def _on_accept_deadline(self, pending: PendingAccept):
        now = self.engine.now
        if self._pending is not pending:
            return
        if pending.acked:
            self._confirm(pending, now)
        else:
            self._abandon(pending, now)

    def _end_pending(self, pending: PendingAccept, now: int):
        self._pending = None
        self.engine.cancel(pending.deadline_event)
        pending.deadline_event = None
        self._listen.discard(LISTEN_ACCEPTOR)
        self._close_window(now)
        self._update_radio(now)

    def _confirm(self, pending: PendingAccept, now: int):
        """选通停止即确认：交付给路由层"""
        self._end_pending(pending, now)
        packet = pending.strobe.packet
        self._accepted[(pending.sender, packet.origin, packet.seq)] = None
        while len(self._accepted) > self.accepted_cache_size:
            self._accepted.popitem(last=False)
        self._metrics["delivered_up"] += 1
        self.on_deliver(packet, pending.sender, now)
        self._resume_deferred(now)
        self._maybe_idle(now)

    def _abandon(self, pending: PendingAccept, now: int):
        """竞争失败：撤销接受"""
        self.engine.cancel(self._ack_event)
        self._ack_event = None
        self._end_pending(pending, now)
        self._release(pending)
        self._metrics["abandoned"] += 1
        self._resume_deferred(now)
        self._maybe_idle(now)

    def _release(self, pending: PendingAccept):
        if self.judge is None:
            return
        try:
            self.judge.release(pending.criteria)
        except Exception as e:
            self.record_error(e)

    def get_metrics(self) -> Dict[str, object]:
        metrics = dict(self._metrics)
        metrics["outcomes"] = dict(self._metrics["outcomes"])
        return metrics
