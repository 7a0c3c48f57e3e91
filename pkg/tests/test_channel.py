"""
无线信道测试
测试单位圆盘连通、空中时间、碰撞、半双工、擦除和断电中止
"""

import pytest

from core.channel import Topology, WirelessChannel
from core.errors import MacLayerError
from models.packet import create_ack_frame, create_strobe_frame
from utils.rng import RngStream

from tests.conftest import FakePort, make_packet


@pytest.fixture
def line3():
    """三节点线型：0-1-2，0 与 2 互为隐藏终端"""
    return Topology({0: (0.0, 0.0), 1: (20.0, 0.0), 2: (40.0, 0.0)}, comm_range=30.0)


def _attach(channel, topology, **ports):
    attached = {}
    for node_id in topology.node_ids:
        port = ports.get(f"p{node_id}", FakePort())
        channel.attach(node_id, port)
        attached[node_id] = port
    return attached


def _frame(src=0, seq=1):
    return create_strobe_frame(src, make_packet(origin=src, seq=seq), 0, False)


class TestTopology:
    """拓扑测试"""

    def test_unit_disk(self, line3):
        assert line3.neighbors(1) == (0, 2)
        assert line3.neighbors(0) == (1,)
        assert line3.in_range(0, 1)
        assert not line3.in_range(0, 2)

    def test_range_is_inclusive(self):
        topo = Topology({0: (0.0, 0.0), 1: (30.0, 0.0)}, comm_range=30.0)
        assert topo.neighbors(0) == (1,)

    def test_connectivity_and_hops(self, line3):
        assert line3.is_connected()
        assert line3.hop_distances(0) == {0: 0, 1: 1, 2: 2}
        split = Topology({0: (0.0, 0.0), 1: (100.0, 0.0)}, comm_range=30.0)
        assert not split.is_connected()


class TestWirelessChannel:
    """信道投递测试"""

    def test_airtime(self, engine, line3):
        channel = WirelessChannel(engine, line3, bitrate_bps=250_000)
        # 8 × 39 字节 / 250 kbit/s = 1248 µs
        assert channel.airtime_us(39) == 1248
        assert channel.airtime_us(1) == 32

    def test_single_frame_delivered_to_neighbors(self, engine, line3):
        channel = WirelessChannel(engine, line3)
        ports = _attach(channel, line3)
        frame = _frame(src=1)
        tx = channel.broadcast(1, frame, 0)

        engine.run_until(10_000)

        assert ports[0].frames == [(tx.end, frame)]
        assert ports[2].frames == [(tx.end, frame)]
        assert ports[1].tx_done and ports[1].frames == []
        assert channel.get_metrics()["delivered"] == 2

    def test_hidden_terminal_collision(self, engine, line3):
        """0 和 2 同时发送，1 处碰撞，不投递"""
        channel = WirelessChannel(engine, line3)
        ports = _attach(channel, line3)
        channel.broadcast(0, _frame(src=0), 0)
        engine.schedule(100, lambda: channel.broadcast(2, _frame(src=2), engine.now))

        engine.run_until(10_000)

        assert ports[1].frames == []
        assert len(ports[1].garbled) == 2
        assert channel.get_metrics()["collided"] == 2

    def test_non_listening_receiver_misses_frame(self, engine, line3):
        channel = WirelessChannel(engine, line3)
        ports = _attach(channel, line3, p0=FakePort(listening=False))
        channel.broadcast(1, _frame(src=1), 0)
        engine.run_until(10_000)
        assert ports[0].frames == []
        assert len(ports[2].frames) == 1

    def test_half_duplex_abandons_reception(self, engine, line3):
        """接收中开始发送即放弃接收"""
        channel = WirelessChannel(engine, line3)
        ports = _attach(channel, line3)
        channel.broadcast(0, _frame(src=0), 0)
        engine.schedule(200, lambda: channel.broadcast(1, create_ack_frame(1, _frame(src=2)), engine.now))
        engine.run_until(10_000)
        assert all(frame.src != 0 for _, frame in ports[1].frames)

    def test_erasure(self, engine, line3):
        """p_loss 接近 1 时帧被擦除"""
        channel = WirelessChannel(engine, line3, p_loss=0.999999, rng=RngStream(1, -1, "channel"))
        ports = _attach(channel, line3)
        channel.broadcast(1, _frame(src=1), 0)
        engine.run_until(10_000)
        assert ports[0].frames == [] and ports[2].frames == []
        assert channel.get_metrics()["erased"] == 2

    def test_off_sender_is_ignored(self, engine, line3):
        channel = WirelessChannel(engine, line3)
        ports = _attach(channel, line3, p1=FakePort(on=False))
        assert channel.broadcast(1, _frame(src=1), 0) is None
        assert channel.get_metrics()["tx_while_off"] == 1
        assert ports[0].rx_starts == 0

    def test_double_transmit_raises(self, engine, line3):
        channel = WirelessChannel(engine, line3)
        _attach(channel, line3)
        channel.broadcast(1, _frame(src=1), 0)
        with pytest.raises(MacLayerError):
            channel.broadcast(1, _frame(src=1, seq=2), 10)

    def test_power_off_aborts_transmission(self, engine, line3):
        """发送者断电，接收者得到损毁"""
        channel = WirelessChannel(engine, line3)
        ports = _attach(channel, line3)
        channel.broadcast(1, _frame(src=1), 0)
        engine.schedule(100, lambda: channel.node_powered_off(1, engine.now))
        engine.run_until(10_000)
        assert ports[0].frames == [] and ports[2].frames == []
        assert ports[0].garbled == [100]
        assert ports[1].tx_done == []
        assert channel.get_metrics()["aborted"] == 1


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
