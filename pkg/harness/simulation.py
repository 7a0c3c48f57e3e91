"""
单次仿真运行
构建引擎、拓扑、信道和节点，运行到场景时长，写出追踪并给出运行时汇总
"""

import time
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from core.channel import WirelessChannel
from core.energy import load_harvest_trace
from core.engine import SimEngine, s_to_us
from core.node import SensorNode
from harness.invariants import check_run
from harness.metrics import MetricsBuilder
from harness.scenario_loader import effective_parameters, with_seed
from harness.topology import build_topology
from harness.traffic import build_flows
from models.metrics import MetricsSummary
from models.packet import Packet
from models.scenario import Scenario
from models.trace import TraceKind
from utils.logger import RunLogger
from utils.rng import GLOBAL_STREAM, RngStreams
from utils.trace_writer import TraceWriter

# 路由层计数 → 丢弃记录类型
_DROP_COUNTERS = {
    "ttl_drops": TraceKind.TTL_DROP,
    "queue_drops": TraceKind.QUEUE_DROP,
    "no_forwarder_drops": TraceKind.NO_FORWARDER_DROP,
    "power_drops": TraceKind.POWER_DROP,
}


@dataclass
class RunResult:
    """一次运行的结果"""
    summary: MetricsSummary
    header: Dict[str, Any]
    trace_path: Optional[Path] = None
    records: Optional[List[Dict[str, Any]]] = None
    wall_ms: int = 0
    nodes: Dict[int, SensorNode] = field(default_factory=dict, repr=False)


class Simulation:
    """一次仿真"""

    def __init__(
        self,
        scenario: Scenario,
        trace_path: Optional[Union[str, Path]] = None,
        keep_in_memory: bool = False,
        dump_neighbors: bool = False,
        record_dispatch: bool = False,
    ):
        self.scenario = scenario
        self.dump_neighbors = dump_neighbors or scenario.trace.dump_neighbors
        self.engine = SimEngine(record_dispatch=record_dispatch)
        self.streams = RngStreams(scenario.seed)
        self.trace = TraceWriter(trace_path, keep_in_memory=keep_in_memory)
        self.topology = build_topology(scenario, self.streams)
        self.channel = WirelessChannel(
            self.engine,
            self.topology,
            bitrate_bps=scenario.channel.bitrate_bps,
            p_loss=scenario.channel.p_loss,
            rng=self.streams.stream(GLOBAL_STREAM, "channel"),
            trace=self.trace,
        )
        self.end_us = s_to_us(scenario.duration_s)
        self.run_logger = RunLogger(scenario.name, scenario.seed)

        harvest_cache: Dict[str, List[Tuple[int, int]]] = {}
        self.nodes: Dict[int, SensorNode] = {}
        for node_id in scenario.node_ids():
            steps = None
            path = scenario.node_harvest_trace(node_id)
            if path:
                if path not in harvest_cache:
                    harvest_cache[path] = load_harvest_trace(path)
                steps = harvest_cache[path]
            node = SensorNode(node_id, scenario, self.engine, self.channel, self.streams, steps, trace=self.trace)
            node.routing.on_app_deliver = partial(self._on_deliver, node_id)
            self.nodes[node_id] = node

        self.builder = MetricsBuilder(
            scenario.name,
            scenario.seed,
            self.end_us,
            [(flow.source, scenario.flow_dest(flow)) for flow in scenario.flows],
        )
        self.deliveries: List[Tuple[int, int, Tuple[int, ...], Tuple[float, ...]]] = []
        self.flows = build_flows(
            scenario, self.engine, self.nodes, self.streams, self.end_us,
            trace=self.trace, on_generated=self.builder.generated,
        )
        self.sample_us = s_to_us(scenario.energy.sample_interval_s)

    def _on_deliver(self, node_id: int, packet: Packet, route: Tuple[int, ...], now: int):
        self.builder.delivered(packet.origin, packet.final_dest, packet.seq, route, now - packet.created_at)
        self.deliveries.append((node_id, packet.final_dest, route, packet.edc_tags))

    def _on_sample(self):
        now = self.engine.now
        for node_id in sorted(self.nodes):
            self.nodes[node_id].energy.sample(now)
        if now + self.sample_us <= self.end_us:
            self.engine.schedule(now + self.sample_us, self._on_sample, target="sampler", kind="energy_sample")

    def run(self) -> RunResult:
        """运行到场景时长"""
        self.run_logger.log_run_start(len(self.nodes), self.scenario.duration_s)
        started = time.perf_counter()
        try:
            for node_id in sorted(self.nodes):
                self.nodes[node_id].start(0)
            if self.sample_us <= self.end_us:
                self.engine.schedule(self.sample_us, self._on_sample, target="sampler", kind="energy_sample")
            for generator in self.flows:
                generator.start()
            self.engine.run_until(self.end_us)
            header = self._finish()
        except Exception as e:
            self.trace.discard()
            self.run_logger.log_run_failed(str(e))
            raise

        # 不变量检查失败也保留追踪文件，便于排查
        check_run(self.nodes, self.channel.get_metrics(), self.deliveries)

        wall_ms = int((time.perf_counter() - started) * 1000)
        self.run_logger.log_run_complete(self.engine.dispatched_total, wall_ms)
        return RunResult(
            summary=self.builder.build(),
            header=header,
            trace_path=self.trace.path,
            records=self.trace.memory,
            wall_ms=wall_ms,
            nodes=self.nodes,
        )

    def _finish(self) -> Dict[str, Any]:
        t_end = self.end_us
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            if self.dump_neighbors:
                node.dump_neighbors(t_end)
            energy_record = node.energy.finalize(t_end)
            self.trace.emit(t_end, node_id, TraceKind.ENERGY_FINAL, **energy_record)
            node_record = node.finalize(t_end)
            self.trace.emit(t_end, node_id, TraceKind.NODE_FINAL, **node_record)

            self.builder.node(node_id, energy_record, node_record)
            routing = node_record["routing"]
            for counter, kind in _DROP_COUNTERS.items():
                if routing[counter]:
                    self.builder.drop(kind.value, routing[counter])
            mac = node_record["mac"]
            self.builder.strobes(mac["strobes"])
            self.builder.outcome_totals(mac["outcomes"], mac["forwarded_strobes"])

        header = {
            "seed": self.scenario.seed,
            "scenario": effective_parameters(self.scenario),
            "duration_us": self.end_us,
            "dispatched": self.engine.dispatched_total,
            "final_clock_us": self.engine.now,
            "positions": {str(n): list(p) for n, p in self.topology.positions.items()},
            "channel": self.channel.get_metrics(),
        }
        self.trace.close(header)
        return self.trace.header


def run_scenario(
    scenario: Scenario,
    seed: Optional[int] = None,
    trace_path: Optional[Union[str, Path]] = None,
    keep_in_memory: bool = False,
    dump_neighbors: bool = False,
) -> RunResult:
    """run：执行一个场景（可覆盖种子）"""
    if seed is not None:
        scenario = with_seed(scenario, seed)
    return Simulation(scenario, trace_path, keep_in_memory=keep_in_memory, dump_neighbors=dump_neighbors).run()
