"""
路由协议测试
测试打标签、队列与丢弃、断电行为，以及常供电网络中的上行、下行和任意节点路由
"""

from dataclasses import replace

import pytest

from core.channel import WirelessChannel
from core.engine import SimEngine
from core.node import SensorNode
from harness.scenario_loader import parse_scenario
from harness.simulation import Simulation, run_scenario
from harness.topology import build_topology
from models.packet import NO_ROUTE, Edc, MetricKind, Packet, create_upward_criteria
from protocols.interfaces import NoDeferral
from protocols.routing_set import RoutingSet
from utils.rng import RngStreams

from tests.conftest import scenario_dict


def _scenario(**overrides):
    data = scenario_dict(
        topology={"kind": "line", "n": 4},
        routing={"protocol": "orpl", "adv_interval_s": 30, "p_piggyback": 1.0},
    )
    data.update(overrides)
    return parse_scenario(data)


def _nodes(scenario):
    """只装配不运行"""
    engine = SimEngine()
    streams = RngStreams(scenario.seed)
    channel = WirelessChannel(engine, build_topology(scenario, streams))
    nodes = {n: SensorNode(n, scenario, engine, channel, streams) for n in scenario.node_ids()}
    return engine, nodes


@pytest.fixture
def started():
    """4 节点线型，全部上电，节点 2 听到 EDC 为 1 的节点 1"""
    engine, nodes = _nodes(_scenario())
    for node in nodes.values():
        node.start(0)
    nodes[2].table.on_routing_overheard(1, Edc.of(1.0), None, 0)
    return engine, nodes


def _data(origin=3, seq=1, dest=0, ttl=16):
    return Packet(
        origin=origin, final_dest=dest, seq=seq, ttl=ttl, payload_len=20,
        criteria=create_upward_criteria(origin, seq, Edc.of(5.0)),
    )


class TestTagging:
    """打标签测试"""

    def test_no_route_gives_none(self, started):
        _, nodes = started
        assert nodes[3].routing.tag(_data(origin=3), 0) is None

    def test_upward_uses_own_edc(self, started):
        _, nodes = started
        criteria = nodes[2].routing.tag(_data(origin=2), 0)
        assert criteria.metric == MetricKind.UPWARD_EDC
        assert criteria.sender_edc == nodes[2].table.own_edc
        assert criteria.final_dest is None

    def test_sink_tags_downward(self, started):
        _, nodes = started
        criteria = nodes[0].routing.tag(_data(origin=0, dest=3), 0)
        assert criteria.metric == MetricKind.DOWNWARD_SET
        assert criteria.final_dest == 3

    def test_holder_tags_downward(self, started):
        _, nodes = started
        nodes[2].table.on_routing_overheard(3, Edc.of(9.0), RoutingSet.of({3}), 0)
        criteria = nodes[2].routing.tag(_data(origin=0, dest=3), 0)
        assert criteria.metric == MetricKind.DOWNWARD_SET

    def test_any_to_any_goes_up_first(self, started):
        """不持有目的地址时先上行，准则里带最终目的"""
        _, nodes = started
        criteria = nodes[2].routing.tag(_data(origin=2, dest=1), 0)
        assert criteria.metric == MetricKind.UPWARD_EDC
        assert criteria.final_dest == 1

    def test_forwarded_tag_capped(self, started):
        """接受后本节点EDC上升时，转发标签不超过上一跳标签减 margin"""
        _, nodes = started
        assert nodes[2].table.own_edc.value == pytest.approx(3.1)
        packet = replace(_data(origin=3), edc_tags=(3.4,))
        criteria = nodes[2].routing.tag(packet, 0)
        assert criteria.sender_edc.value == pytest.approx(2.9)
        packet = replace(_data(origin=3), edc_tags=(9.0,))
        assert nodes[2].routing.tag(packet, 0).sender_edc == nodes[2].table.own_edc

    def test_sequence_numbers_wrap(self, started):
        _, nodes = started
        routing = nodes[1].routing
        routing._seq = 0xFFFF
        assert routing.next_seq() == 0xFFFF
        assert routing.next_seq() == 0


class TestQueue:
    """队列、丢弃和断电测试"""

    def test_originate_while_off(self):
        _, nodes = _nodes(_scenario())
        assert nodes[3].originate(0, 20, 0) is None

    def test_unroutable_packet_waits(self, started):
        _, nodes = started
        packet = nodes[3].originate(0, 20, 0)
        assert packet is not None and packet.origin == 3
        assert nodes[3].routing.get_metrics()["queue_len"] == 1

    def test_queue_cap_drops_oldest(self):
        engine, nodes = _nodes(_scenario(routing={"protocol": "orw", "queue_cap": 2}))
        nodes[3].start(0)
        for _ in range(3):
            nodes[3].originate(0, 20, 0)
        metrics = nodes[3].routing.get_metrics()
        assert metrics["queue_drops"] == 1
        assert metrics["queue_len"] == 2
        assert [item.packet.seq for item in nodes[3].routing.queue] == [1, 2]

    def test_power_off_loses_queue(self, started):
        _, nodes = started
        nodes[3].originate(0, 20, 0)
        nodes[3].originate(0, 20, 0)
        nodes[3].power_off(10)
        metrics = nodes[3].routing.get_metrics()
        assert metrics["power_drops"] == 2
        assert metrics["queue_len"] == 0

    def test_routing_state_persists_across_power_off(self, started):
        _, nodes = started
        own = nodes[2].table.own_edc
        nodes[2].power_off(10)
        assert nodes[2].table.own_edc == own

    def test_routing_state_reset_when_not_persisted(self):
        engine, nodes = _nodes(_scenario(energy={"mode": "always_on", "persist_routing_state": False}))
        nodes[2].start(0)
        nodes[2].table.on_routing_overheard(1, Edc.of(1.0), None, 0)
        nodes[2].power_off(10)
        assert nodes[2].table.own_edc == NO_ROUTE
        assert len(nodes[2].neighbors) == 0

    def test_ttl_expiry_drops(self, started):
        _, nodes = started
        nodes[2].routing.on_accepted(_data(origin=3, ttl=1), 3, 0)
        assert nodes[2].routing.get_metrics()["ttl_drops"] == 1

    def test_accepted_for_self_is_delivered(self, started):
        _, nodes = started
        delivered = []
        nodes[0].routing.on_app_deliver = lambda packet, route, now: delivered.append(route)
        packet = replace(_data(origin=3), hops=(3, 2, 1))
        nodes[0].routing.on_accepted(packet, 1, 0)
        assert delivered == [(3, 2, 1, 0)]
        assert nodes[0].routing.get_metrics()["delivered"] == 1


class TestEndToEnd:
    """常供电网络端到端测试"""

    def test_upward_line(self, line_scenario):
        """5 节点线型上行：交付完整，路径逐跳相邻，EDC标签严格递减"""
        result = run_scenario(line_scenario, keep_in_memory=True)
        flow = result.summary.flow(4, 0)
        assert flow.generated == 20
        assert flow.delivery_ratio >= 0.9
        assert result.summary.duplicate_deliveries == 0

        for record in result.records:
            if record["kind"] != "deliver":
                continue
            hops = record["hops"]
            assert hops[0] == 4 and hops[-1] == 0
            assert all(abs(a - b) == 1 for a, b in zip(hops, hops[1:]))
            tags = record["edc_tags"]
            assert all(b < a for a, b in zip(tags, tags[1:]))

    def test_downward_and_any_to_any(self):
        """ORPL：汇聚节点向最远节点下行，以及非汇聚节点之间的路由"""
        scenario = _scenario(
            duration_s=400,
            flows=[
                {"source": 0, "dest": 3, "period_s": 10, "count": 10, "start_s": 200},
                {"source": 3, "dest": 1, "period_s": 10, "count": 10, "start_s": 201},
            ],
        )
        result = Simulation(scenario, keep_in_memory=True).run()
        assert result.summary.flow(0, 3).delivery_ratio >= 0.8
        assert result.summary.flow(3, 1).delivery_ratio >= 0.8
        for record in result.records:
            if record["kind"] == "deliver":
                assert record["hops"][-1] == record["dest"]

    def test_orw_cannot_route_downward(self):
        """ORW 没有路由集合，下行分组只能到达一跳邻居"""
        scenario = _scenario(
            duration_s=300,
            routing={"protocol": "orw", "adv_interval_s": 30},
            flows=[{"source": 0, "dest": 3, "period_s": 10, "count": 5, "start_s": 150}],
        )
        result = run_scenario(scenario)
        assert result.summary.flow(0, 3).delivered == 0


class TestWiring:
    """节点装配测试"""

    def test_ewma_deferrer_is_neighbor_table(self):
        """邻居表为空时同样接入唤醒预测"""
        _, nodes = _nodes(_scenario())
        for node in nodes.values():
            assert len(node.neighbors) == 0
            assert node.mac.deferrer is node.neighbors

    def test_none_policy_never_defers(self):
        _, nodes = _nodes(_scenario(mac={"defer_policy": "none"}))
        for node in nodes.values():
            assert isinstance(node.mac.deferrer, NoDeferral)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
