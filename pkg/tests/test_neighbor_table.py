"""
邻居表测试
测试相遇记账、链路质量、陈旧判定、唤醒周期估计、发送推迟和信号分发
"""

import pytest

from models.packet import Edc, create_ack_frame, create_strobe_frame
from models.signals import (
    EncounterKind,
    create_coincidental_signal,
    create_expected_signal,
    create_period_end_signal,
)
from protocols.interfaces import DeferReason, IDeferTransmission
from protocols.neighbor_table import NeighborTable
from utils.signal_bus import SignalBus

from tests.conftest import make_packet

WAKE = 1_000_000
LISTEN = 20_000


@pytest.fixture
def table():
    """节点 1 的邻居表，陈旧阈值 5 s"""
    return NeighborTable(1, wake_interval_us=WAKE, listen_len_us=LISTEN, stale_after_us=5_000_000)


def _strobe(peer, seq=1):
    return create_strobe_frame(peer, make_packet(origin=peer, seq=seq), 0, False)


def _expected(peer, at):
    # 对端确认本节点的选通
    return create_expected_signal(peer, create_ack_frame(peer, _strobe(1)), at)


def _coincidental(peer, at, seq=1):
    return create_coincidental_signal(peer, _strobe(peer, seq), at)


class TestEncounters:
    """相遇记账测试"""

    def test_unknown_peer(self, table):
        assert table.neighbor_status(9, 0) is None
        assert 9 not in table

    def test_record_counts_by_kind(self, table):
        table.on_signal(_coincidental(2, 100))
        table.on_signal(_expected(2, 200))
        record = table.record(2)
        assert record.encounters[EncounterKind.COINCIDENTAL] == 1
        assert record.encounters[EncounterKind.EXPECTED] == 1
        assert record.last_heard == 200
        assert len(table) == 1

    def test_same_train_counts_once(self, table):
        """同一串选通的多次侦听只算一次成功尝试"""
        for at in (100, 1500, 2900):
            table.on_signal(_coincidental(2, at, seq=4))
        assert len(table.record(2).attempts) == 1
        table.on_signal(_coincidental(2, 5000, seq=5))
        assert len(table.record(2).attempts) == 2

    def test_p_link_smoothing(self, table):
        """加一平滑：无历史为 1/2，一次成功一次失败为 1/2，一次成功为 2/3"""
        table.update_advertised(2, Edc.of(1.0), 0)
        assert table.neighbor_status(2, 0).p_link == pytest.approx(0.5)
        table.on_signal(_coincidental(2, 10))
        assert table.neighbor_status(2, 10).p_link == pytest.approx(2 / 3)
        table.record_failure(2)
        assert table.neighbor_status(2, 10).p_link == pytest.approx(0.5)

    def test_record_failure_unknown_peer_is_noop(self, table):
        table.record_failure(7)
        assert 7 not in table

    def test_period_end_counts_windows(self, table):
        table.on_signal(create_period_end_signal(1000))
        table.on_signal(create_period_end_signal(2000, peer=2))
        assert table.windows == 2
        assert table.missed_windows == 1

    def test_record_encounter_requires_peer(self, table):
        with pytest.raises(ValueError):
            table.record_encounter(create_period_end_signal(10))

    def test_update_advertised_reports_change(self, table):
        assert table.update_advertised(2, Edc.of(3.0), 0) is True
        assert table.update_advertised(2, Edc.of(3.0), 10) is False
        assert table.record(2).last_heard == 10


class TestStaleness:
    """陈旧判定测试"""

    def test_becomes_stale_and_recovers(self, table):
        """超过阈值未听到变陈旧，再次听到后恢复，两次都通知监听者"""
        notified = []
        table.add_change_listener(notified.append)
        table.update_advertised(2, Edc.of(1.0), 0)

        assert table.check_staleness(5_000_000) == []
        assert table.check_staleness(5_000_001) == [2]
        assert table.neighbor_status(2, 5_000_001).stale
        assert notified == [5_000_001]

        table.on_signal(_coincidental(2, 6_000_000))
        assert not table.neighbor_status(2, 6_000_000).stale
        assert notified == [5_000_001, 6_000_000]

    def test_period_end_checks_staleness(self, table):
        table.update_advertised(2, Edc.of(1.0), 0)
        table.on_signal(create_period_end_signal(6_000_000))
        assert table.record(2).stale

    def test_routing_candidates(self, table):
        """候选邻居要求未陈旧且EDC有限，按节点号排序"""
        table.update_advertised(3, Edc.of(2.0), 0)
        table.update_advertised(2, Edc.of(1.0), 0)
        table.update_advertised(4, Edc(), 0)
        table.on_signal(_coincidental(5, 0))
        assert table.routing_candidates(100) == [(2, 1.0, 0.5), (3, 2.0, 0.5)]
        assert table.routing_candidates(5_000_001) == []

    def test_reset(self, table):
        table.update_advertised(2, Edc.of(1.0), 0)
        table.reset()
        assert len(table) == 0
        assert table.dump() == []


class TestWakePrediction:
    """唤醒周期估计与推迟测试"""

    def test_period_estimate(self, table):
        """第二次 ACK 给出初始估计，之后 EWMA 平滑"""
        table.on_signal(_expected(2, 100_000))
        assert table.record(2).wake_period_est is None
        table.on_signal(_expected(2, 1_100_000))
        assert table.record(2).wake_period_est == pytest.approx(1_000_000)
        table.on_signal(_expected(2, 2_200_000))
        assert table.record(2).wake_period_est == pytest.approx(0.8 * 1_000_000 + 0.2 * 1_100_000)

    def test_same_window_observation_ignored(self, table):
        """同一窗口内的第二次 ACK 不更新估计"""
        table.on_signal(_expected(2, 100_000))
        table.on_signal(_expected(2, 1_100_000))
        table.on_signal(_expected(2, 1_110_000))
        record = table.record(2)
        assert record.last_wake_seen == 1_100_000
        assert record.wake_period_est == pytest.approx(1_000_000)

    def test_missed_windows_are_folded(self, table):
        """跨越多个周期的间隔按周期数折算"""
        table.on_signal(_expected(2, 100_000))
        table.on_signal(_expected(2, 1_100_000))
        table.on_signal(_expected(2, 4_100_000))
        assert table.record(2).wake_period_est == pytest.approx(1_000_000)

    def test_predict_next_wake(self, table):
        table.on_signal(_expected(2, 100_000))
        table.on_signal(_expected(2, 1_100_000))
        assert table.predict_next_wake(2, 1_500_000) == 2_100_000
        assert table.predict_next_wake(2, 2_100_000) == 2_100_000
        assert table.predict_next_wake(3, 1_500_000) is None

    def test_should_defer(self, table):
        """预测对端睡眠时推迟到窗口前半个侦听期，接近窗口时不推迟"""
        assert isinstance(table, IDeferTransmission)
        assert table.should_defer(2, 0).reason == DeferReason.NO_HISTORY

        table.on_signal(_expected(2, 100_000))
        table.on_signal(_expected(2, 1_100_000))

        decision = table.should_defer(2, 1_500_000)
        assert decision.reason == DeferReason.PREDICTED_ASLEEP
        assert decision.defer_for == 2_100_000 - LISTEN // 2 - 1_500_000
        assert decision.defer_for <= WAKE

        decision = table.should_defer(2, 2_090_000)
        assert decision == table.should_defer(2, 2_090_000)
        assert decision.reason == DeferReason.PREDICTED_AWAKE
        assert decision.defer_for == 0

    def test_should_defer_uses_better_neighbors(self, table):
        """无提示时只看EDC优于本节点的邻居"""
        table.own_metric = lambda: Edc.of(2.0)
        table.on_signal(_expected(2, 100_000))
        table.on_signal(_expected(2, 1_100_000))
        table.update_advertised(2, Edc.of(5.0), 1_100_000)
        assert table.should_defer(None, 1_500_000).reason == DeferReason.NO_HISTORY

        table.update_advertised(2, Edc.of(1.0), 1_100_000)
        assert table.should_defer(None, 1_500_000).reason == DeferReason.PREDICTED_ASLEEP

    def test_dump(self, table):
        table.on_signal(_expected(2, 100_000))
        dumped = table.dump()
        assert dumped[0]["peer"] == 2
        assert dumped[0]["encounters"]["EXPECTED"] == 1
        assert dumped[0]["advertised_edc"] is None


class TestSignalBus:
    """信号总线测试"""

    def test_fan_out_in_order_and_count(self):
        """重复注册只算一次，按注册顺序分发，按类型计数"""
        bus = SignalBus(1)
        seen = []

        def first(signal):
            seen.append(("first", signal.kind))

        bus.subscribe_all(first)
        bus.subscribe_all(first)
        bus.subscribe_all(lambda signal: seen.append(("second", signal.kind)))

        bus.publish(create_coincidental_signal(2, _strobe(2), 10))
        bus.publish(create_period_end_signal(20))

        assert seen == [
            ("first", EncounterKind.COINCIDENTAL),
            ("second", EncounterKind.COINCIDENTAL),
            ("first", EncounterKind.EXPECTED_PERIOD_END),
            ("second", EncounterKind.EXPECTED_PERIOD_END),
        ]
        metrics = bus.get_metrics()
        assert metrics[EncounterKind.COINCIDENTAL.value] == 1
        assert metrics[EncounterKind.EXPECTED_PERIOD_END.value] == 1
        assert metrics[EncounterKind.EXPECTED.value] == 0


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
