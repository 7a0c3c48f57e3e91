"""
仿真引擎测试
测试事件排序、取消、按目标取消和时钟推进
"""

import pytest

from core.engine import PRIO_CHANNEL, PRIO_ENERGY, PRIO_TIMER, SimEngine, s_to_us, us_to_s
from core.errors import SchedulingError
from utils.rng import RngStream, RngStreams


@pytest.fixture
def engine():
    """创建测试用引擎"""
    return SimEngine(record_dispatch=True)


class TestScheduling:
    """事件调度测试"""

    def test_time_then_priority_then_fifo(self, engine):
        """同一时刻按优先级分发，同优先级按调度顺序"""
        order = []
        engine.schedule(100, lambda: order.append("timer-a"), PRIO_TIMER)
        engine.schedule(100, lambda: order.append("channel"), PRIO_CHANNEL)
        engine.schedule(50, lambda: order.append("early"), PRIO_TIMER)
        engine.schedule(100, lambda: order.append("energy"), PRIO_ENERGY)
        engine.schedule(100, lambda: order.append("timer-b"), PRIO_TIMER)

        engine.run_until(1000)

        assert order == ["early", "channel", "energy", "timer-a", "timer-b"]
        assert engine.dispatched_total == 5

    def test_schedule_in_past_raises(self, engine):
        """调度到过去是致命错误"""
        engine.schedule(10, lambda: None)
        engine.run_until(10)
        with pytest.raises(SchedulingError):
            engine.schedule(5, lambda: None)

    def test_schedule_at_now_is_allowed(self, engine):
        """在当前时刻调度的事件在同一轮分发"""
        fired = []
        engine.schedule(10, lambda: engine.schedule(engine.now, lambda: fired.append(engine.now)))
        engine.run_until(10)
        assert fired == [10]

    def test_cancel(self, engine):
        """取消的事件不分发，重复取消返回False"""
        fired = []
        handle = engine.schedule(10, lambda: fired.append(1))
        assert engine.cancel(handle) is True
        assert engine.cancel(handle) is False
        assert engine.pending_count == 0
        engine.run_until(100)
        assert fired == []

    def test_cancel_after_fire(self, engine):
        """已触发的事件不能取消"""
        handle = engine.schedule(10, lambda: None)
        engine.run_until(10)
        assert engine.cancel(handle) is False

    def test_cancel_target(self, engine):
        """按目标取消一个节点的全部定时器"""
        fired = []
        for t in (10, 20, 30):
            engine.schedule(t, lambda t=t: fired.append(t), target=("node", 1))
        engine.schedule(15, lambda: fired.append("other"), target=("node", 2))

        assert engine.cancel_target(("node", 1)) == 3
        assert engine.cancel_target(("node", 1)) == 0
        engine.run_until(100)
        assert fired == ["other"]

    def test_targeted_events_dispatch(self, engine):
        """带目标的事件正常分发，分发后从目标登记中移除"""
        fired = []
        first = engine.schedule(10, lambda: fired.append(10), target=("node", 1))
        engine.schedule(10, lambda: fired.append("tx_end"), PRIO_CHANNEL, target="channel")
        engine.schedule(20, lambda: fired.append(20), target=("node", 1))

        assert engine.run_until(15) == 2
        assert fired == ["tx_end", 10]
        assert engine.cancel(first) is False
        assert engine.cancel_target(("node", 1)) == 1
        assert engine.cancel_target("channel") == 0
        assert engine.run_until(100) == 0

    def test_cancelled_handles_are_compacted(self, engine):
        """大量取消后堆被重建，剩余事件仍按顺序分发"""
        fired = []
        handles = [engine.schedule(t, lambda t=t: fired.append(t), target=("node", t % 3)) for t in range(1, 601)]
        for handle in handles[:500]:
            engine.cancel(handle)

        assert engine.pending_count == 100
        assert 100 <= engine.queue_size < 600
        assert engine.run_until(1000) == 100
        assert fired == list(range(501, 601))


class TestClock:
    """时钟推进测试"""

    def test_clock_stops_at_t_end_when_events_remain(self, engine):
        """t_end 之后还有事件时时钟停在 t_end"""
        engine.schedule(10, lambda: None)
        engine.schedule(500, lambda: None)
        assert engine.run_until(100) == 1
        assert engine.now == 100
        assert engine.pending_count == 1

    def test_clock_stops_at_last_event_when_drained(self, engine):
        """队列清空时时钟停在最后一个事件"""
        engine.schedule(42, lambda: None)
        engine.run_until(1000)
        assert engine.now == 42

    def test_event_at_t_end_is_dispatched(self, engine):
        fired = []
        engine.schedule(100, lambda: fired.append(True))
        engine.run_until(100)
        assert fired == [True]

    def test_dispatch_log_is_ordered(self, engine):
        """分发记录按 (时刻, 优先级, 序号) 单调"""
        rng = RngStream(5, 0, "test")
        for _ in range(200):
            engine.schedule(rng.integers(0, 1000), lambda: None, rng.integers(0, 3))
        engine.run_until(1000)
        keys = [entry[:3] for entry in engine.dispatch_log]
        assert keys == sorted(keys)
        assert len(keys) == 200

    def test_unit_conversion(self):
        assert s_to_us(1.5) == 1_500_000
        assert s_to_us(0.000192) == 192
        assert us_to_s(250_000) == 0.25


class TestRngStreams:
    """随机数流测试"""

    def test_same_stream_same_values(self):
        """同一 (种子, 节点, 用途) 得到相同序列"""
        a = RngStreams(9).stream(3, "mac.phase")
        b = RngStreams(9).stream(3, "mac.phase")
        assert [a.random() for _ in range(5)] == [b.random() for _ in range(5)]

    def test_streams_are_independent(self):
        """不同用途的流互不影响"""
        streams = RngStreams(9)
        first = streams.stream(3, "mac.phase").random()
        other = RngStreams(9)
        other.stream(3, "mac.backoff").random()
        assert other.stream(3, "mac.phase").random() == first

    def test_different_seeds_differ(self):
        a = RngStreams(1).stream(0, "x")
        b = RngStreams(2).stream(0, "x")
        assert [a.random() for _ in range(3)] != [b.random() for _ in range(3)]

    def test_factory_returns_same_instance(self):
        streams = RngStreams(1)
        assert streams.stream(0, "x") is streams.stream(0, "x")


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
