"""
邻居表（链路层侧）
消费MAC发出的相遇信号，维护相遇历史、链路质量和唤醒周期估计，
并实现 IDeferTransmission 的 EWMA 唤醒预测
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Deque, Dict, List, Optional, Tuple

from models.packet import NO_ROUTE, Edc
from models.signals import EncounterKind, EncounterSignal
from protocols.interfaces import DeferDecision, DeferReason
from utils.logger import NodeLogger


@dataclass
class NeighborRecord:
    """单个邻居的记录"""
    peer: int
    encounters: Dict[EncounterKind, int] = field(
        default_factory=lambda: {EncounterKind.EXPECTED: 0, EncounterKind.COINCIDENTAL: 0}
    )
    last_heard: int = 0
    attempts: Deque[bool] = field(default_factory=lambda: deque(maxlen=16))
    wake_period_est: Optional[float] = None  # 微秒
    last_wake_seen: Optional[int] = None
    wake_obs: int = 0
    advertised_edc: Optional[Edc] = None  # None 表示尚未侦听到路由内容
    stale: bool = False
    last_train: Optional[Tuple[str, int, int]] = None

    @property
    def p_link(self) -> float:
        """最近若干次尝试的加一平滑成功率"""
        successes = sum(1 for ok in self.attempts if ok)
        return (successes + 1) / (len(self.attempts) + 2)

    def to_dict(self) -> Dict[str, object]:
        return {
            "peer": self.peer,
            "encounters": {k.value: v for k, v in self.encounters.items()},
            "last_heard": self.last_heard,
            "p_link": self.p_link,
            "wake_period_est_us": self.wake_period_est,
            "last_wake_seen": self.last_wake_seen,
            "advertised_edc": None if self.advertised_edc is None else self.advertised_edc.to_json(),
            "stale": self.stale,
        }


@dataclass(frozen=True, slots=True)
class NeighborStatus:
    """提供给路由表的只读快照"""
    p_link: float
    advertised_edc: Optional[Edc]
    staleness: int
    stale: bool


class NeighborTable:
    """邻居表"""

    def __init__(
        self,
        node_id: int,
        wake_interval_us: int,
        listen_len_us: int,
        stale_after_us: int,
        ewma_alpha: float = 0.2,
        link_window: int = 16,
        own_metric: Optional[Callable[[], Edc]] = None,
    ):
        self.node_id = node_id
        self.wake_interval_us = wake_interval_us
        self.listen_len_us = listen_len_us
        self.stale_after_us = stale_after_us
        self.ewma_alpha = ewma_alpha
        self.link_window = link_window
        # 本节点当前EDC，用于选择任播推迟的候选邻居
        self.own_metric: Callable[[], Edc] = own_metric or (lambda: NO_ROUTE)

        self._records: Dict[int, NeighborRecord] = {}
        self._change_listeners: List[Callable[[int], None]] = []
        self.windows = 0
        self.missed_windows = 0
        self._logger = NodeLogger(node_id, "neighbor")

    def __contains__(self, peer: int) -> bool:
        return peer in self._records

    def __len__(self) -> int:
        return len(self._records)

    def record(self, peer: int) -> Optional[NeighborRecord]:
        return self._records.get(peer)

    def add_change_listener(self, listener: Callable[[int], None]):
        """邻居可用性变化（变陈旧或恢复）时通知路由表"""
        self._change_listeners.append(listener)

    def _notify(self, now: int):
        for listener in self._change_listeners:
            listener(now)

    def _get_or_create(self, peer: int) -> NeighborRecord:
        record = self._records.get(peer)
        if record is None:
            record = NeighborRecord(peer=peer, attempts=deque(maxlen=self.link_window))
            self._records[peer] = record
        return record

    def on_signal(self, signal: EncounterSignal):
        """信号总线回调"""
        if signal.kind == EncounterKind.EXPECTED_PERIOD_END:
            self.windows += 1
            if signal.peer is None:
                self.missed_windows += 1
            self.check_staleness(signal.at)
            return
        self.record_encounter(signal)

    def record_encounter(self, signal: EncounterSignal) -> NeighborRecord:
        """记录一次带对端的相遇"""
        if signal.peer is None:
            raise ValueError("record_encounter 需要带对端的信号")
        record = self._get_or_create(signal.peer)
        record.encounters[signal.kind] = record.encounters.get(signal.kind, 0) + 1
        record.last_heard = max(record.last_heard, signal.at)

        # 同一串选通/通告只算一次成功尝试
        frame = signal.frame
        train = None
        if frame is not None and frame.packet is not None:
            train = (frame.kind.value, frame.packet.origin, frame.packet.seq)
        if signal.kind == EncounterKind.EXPECTED or train is None or train != record.last_train:
            record.attempts.append(True)
        if train is not None:
            record.last_train = train

        if signal.kind == EncounterKind.EXPECTED:
            self._observe_wake(record, signal.at)

        if record.stale:
            record.stale = False
            self._notify(signal.at)
        return record

    def _observe_wake(self, record: NeighborRecord, at: int):
        """ACK 证明对端处于侦听窗口，更新唤醒周期估计"""
        last = record.last_wake_seen
        record.wake_obs += 1
        record.last_wake_seen = at
        if last is None:
            return
        gap = at - last
        ref = record.wake_period_est or float(self.wake_interval_us)
        if gap < ref / 2:
            # 同一窗口内的第二次观测
            record.last_wake_seen = last
            record.wake_obs -= 1
            return
        if gap > 2 * ref:
            gap = gap / round(gap / ref)
        if record.wake_period_est is None:
            record.wake_period_est = float(gap)
        else:
            a = self.ewma_alpha
            record.wake_period_est = (1 - a) * record.wake_period_est + a * gap

    def record_failure(self, peer: int):
        """一串选通无人应答"""
        record = self._records.get(peer)
        if record is not None:
            record.attempts.append(False)

    def update_advertised(self, peer: int, edc: Edc, now: int) -> bool:
        """写入侦听到的对端EDC，返回是否变化"""
        record = self._get_or_create(peer)
        record.last_heard = max(record.last_heard, now)
        if record.advertised_edc == edc:
            return False
        record.advertised_edc = edc
        return True

    def neighbor_status(self, peer: int, now: int) -> Optional[NeighborStatus]:
        """只读快照；未知邻居返回None"""
        record = self._records.get(peer)
        if record is None:
            return None
        staleness = now - record.last_heard
        return NeighborStatus(
            p_link=record.p_link,
            advertised_edc=record.advertised_edc,
            staleness=staleness,
            stale=record.stale or staleness > self.stale_after_us,
        )

    def check_staleness(self, now: int) -> List[int]:
        """标记超过陈旧阈值未听到的邻居，返回新变陈旧的邻居"""
        newly = []
        for peer, record in self._records.items():
            if not record.stale and now - record.last_heard > self.stale_after_us:
                record.stale = True
                newly.append(peer)
        if newly:
            self._logger.debug(f"邻居变陈旧: {newly}", now)
            self._notify(now)
        return newly

    def routing_candidates(self, now: int) -> List[Tuple[int, float, float]]:
        """可作为转发者的邻居 (peer, advertised_edc, p_link)：未陈旧且EDC有限"""
        candidates = []
        for peer in sorted(self._records):
            status = self.neighbor_status(peer, now)
            if status.stale or status.advertised_edc is None or not status.advertised_edc.is_finite:
                continue
            candidates.append((peer, status.advertised_edc.value, status.p_link))
        return candidates

    def predict_next_wake(self, peer: int, now: int) -> Optional[int]:
        """预测对端不早于 now 的下一次唤醒时刻"""
        record = self._records.get(peer)
        if record is None or record.last_wake_seen is None or not record.wake_period_est:
            return None
        period = record.wake_period_est
        elapsed = now - record.last_wake_seen
        k = max(0, -(-elapsed // period))
        predicted = int(round(record.last_wake_seen + k * period))
        if predicted < now:
            predicted = int(round(record.last_wake_seen + (k + 1) * period))
        return predicted

    def should_defer(
        self, peer_hint: Optional[int], now: int, candidates: Optional[List[int]] = None
    ) -> DeferDecision:
        """按预测的唤醒时刻推迟发送，推迟时长不超过一个唤醒周期"""
        if peer_hint is not None:
            peers = [peer_hint]
        elif candidates is not None:
            peers = list(candidates)
        else:
            own = self.own_metric()
            peers = []
            for peer, record in self._records.items():
                status = self.neighbor_status(peer, now)
                if status.stale or record.advertised_edc is None:
                    continue
                if record.advertised_edc < own:
                    peers.append(peer)

        predictions = [p for p in (self.predict_next_wake(peer, now) for peer in sorted(peers)) if p is not None]
        if not predictions:
            return DeferDecision(0, DeferReason.NO_HISTORY)
        predicted = min(predictions)
        if predicted - now <= self.listen_len_us:
            return DeferDecision(0, DeferReason.PREDICTED_AWAKE)
        guard = self.listen_len_us // 2
        defer_for = min(predicted - guard - now, self.wake_interval_us)
        return DeferDecision(max(0, defer_for), DeferReason.PREDICTED_ASLEEP)

    def reset(self):
        """断电且不保留路由状态时清空"""
        self._records.clear()

    def dump(self) -> List[Dict[str, object]]:
        return [self._records[p].to_dict() for p in sorted(self._records)]
