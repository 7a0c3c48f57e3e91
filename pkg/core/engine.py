"""
离散事件仿真引擎
整数微秒时钟 + 按 (fire_at, priority, seq) 全序的事件堆
"""

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Hashable, List, Optional, Set, Tuple

from core.errors import SchedulingError

US_PER_S = 1_000_000

# 同一时刻的分发顺序：信道投递先于能量阈值，能量阈值先于节点定时器
PRIO_CHANNEL = 0
PRIO_ENERGY = 1
PRIO_TIMER = 2

# 已取消的句柄超过队列一半时重建堆
COMPACT_MIN_QUEUE = 256

SimTime = int


def s_to_us(seconds: float) -> SimTime:
    """秒转微秒（四舍五入到整数）"""
    return int(round(seconds * US_PER_S))


def us_to_s(us: SimTime) -> float:
    """微秒转秒"""
    return us / US_PER_S


@dataclass(order=True)
class Event:
    """事件句柄，比较只看 (fire_at, priority, seq)"""
    fire_at: SimTime
    priority: int
    seq: int
    action: Callable[[], None] = field(compare=False)
    target: Hashable = field(compare=False, default=None)
    kind: str = field(compare=False, default="")
    cancelled: bool = field(compare=False, default=False)
    fired: bool = field(compare=False, default=False)

    # 句柄按身份登记在目标集合里；(fire_at, priority, seq) 唯一，与相等性一致
    __hash__ = object.__hash__

    @property
    def pending(self) -> bool:
        return not (self.cancelled or self.fired)


class SimEngine:
    """单线程事件引擎，一个实例只在一个线程里使用"""

    def __init__(self, record_dispatch: bool = False):
        self.now: SimTime = 0
        self._queue: List[Event] = []
        self._seq = itertools.count(1)
        self._pending = 0
        # 按目标登记的挂起事件，节点断电时整体取消
        self._by_target: Dict[Hashable, Set[Event]] = {}
        self.dispatched_total = 0
        self.dispatch_log: Optional[List[Tuple[SimTime, int, int, str]]] = [] if record_dispatch else None

    @property
    def pending_count(self) -> int:
        return self._pending

    def schedule(
        self,
        fire_at: SimTime,
        action: Callable[[], None],
        priority: int = PRIO_TIMER,
        target: Hashable = None,
        kind: str = "",
    ) -> Event:
        """调度事件，返回可取消的句柄"""
        if fire_at < self.now:
            raise SchedulingError(
                f"事件 {kind or action} 调度到过去: fire_at={fire_at} < now={self.now}",
                details={"fire_at": fire_at, "now": self.now, "kind": kind},
            )
        event = Event(int(fire_at), priority, next(self._seq), action, target, kind)
        heapq.heappush(self._queue, event)
        self._pending += 1
        if target is not None:
            self._by_target.setdefault(target, set()).add(event)
        return event

    def schedule_in(
        self,
        delay: SimTime,
        action: Callable[[], None],
        priority: int = PRIO_TIMER,
        target: Hashable = None,
        kind: str = "",
    ) -> Event:
        return self.schedule(self.now + delay, action, priority, target, kind)

    def cancel(self, handle: Optional[Event]) -> bool:
        """取消挂起事件；已触发或已取消返回False"""
        if handle is None or not handle.pending:
            return False
        handle.cancelled = True
        self._pending -= 1
        self._forget(handle)
        self._maybe_compact()
        return True

    def cancel_target(self, target: Hashable) -> int:
        """取消某个目标的全部挂起事件，返回取消数量"""
        events = self._by_target.pop(target, None)
        if not events:
            return 0
        count = 0
        for event in sorted(events):
            if event.pending:
                event.cancelled = True
                self._pending -= 1
                count += 1
        self._maybe_compact()
        return count

    def _maybe_compact(self):
        queue = self._queue
        if len(queue) < COMPACT_MIN_QUEUE or len(queue) <= 2 * self._pending:
            return
        # 原地替换，run_until 持有同一个列表
        queue[:] = [event for event in queue if not event.cancelled]
        heapq.heapify(queue)

    @property
    def queue_size(self) -> int:
        """堆中条目数，含尚未清除的已取消句柄"""
        return len(self._queue)

    def _forget(self, event: Event):
        if event.target is None:
            return
        bucket = self._by_target.get(event.target)
        if bucket is not None:
            bucket.discard(event)
            if not bucket:
                del self._by_target[event.target]

    def run_until(self, t_end: SimTime) -> int:
        """分发所有 fire_at <= t_end 的事件，返回分发数量"""
        dispatched = 0
        queue = self._queue
        while queue and queue[0].fire_at <= t_end:
            event = heapq.heappop(queue)
            if event.cancelled:
                continue
            self.now = event.fire_at
            event.fired = True
            self._pending -= 1
            self._forget(event)
            if self.dispatch_log is not None:
                self.dispatch_log.append((event.fire_at, event.priority, event.seq, event.kind))
            event.action()
            dispatched += 1

        # 队列里还有 t_end 之后的事件时时钟停在 t_end，否则停在最后一个事件
        while queue and queue[0].cancelled:
            heapq.heappop(queue)
        if queue and t_end > self.now:
            self.now = t_end
        self.dispatched_total += dispatched
        return dispatched
