"""
指标计算
运行时计数与追踪重算都喂给同一个 MetricsBuilder，两份汇总必须逐字段相等（复式记账）。
追踪重算同时产出 CSV 导出数据：每节点能量曲线、每条流的路径。
"""

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from core.energy import Activity
from models.metrics import FlowMetrics, MetricsSummary, NodeMetrics, flow_key
from models.trace import DROP_KINDS, TraceKind
from utils.logger import get_logger
from utils.trace_writer import TraceReader

logger = get_logger("metrics")

RADIO_ACTIVITIES = (Activity.IDLE_LISTEN.value, Activity.RX.value, Activity.TX.value)

# 视为射频活动（收发）的追踪记录
_ACTIVITY_KINDS = {
    TraceKind.MAC_STROBE.value,
    TraceKind.MAC_ACK.value,
    TraceKind.ADV_TRAIN.value,
    TraceKind.MAC_OUTCOME.value,
    TraceKind.SIGNAL.value,
}


@dataclass
class _FlowState:
    source: int
    dest: int
    generated: int = 0
    skipped: int = 0
    delivered: Dict[int, Tuple[int, Tuple[int, ...]]] = field(default_factory=dict)
    duplicates: int = 0


class MetricsBuilder:
    """汇总累加器"""

    def __init__(self, scenario: str, seed: int, duration_us: int, flows: Iterable[Tuple[int, int]]):
        self.scenario = scenario
        self.seed = seed
        self.duration_us = duration_us
        self._flows: Dict[str, _FlowState] = {flow_key(s, d): _FlowState(s, d) for s, d in flows}
        self._drops: Dict[str, int] = {kind.value: 0 for kind in DROP_KINDS}
        self._nodes: Dict[int, NodeMetrics] = {}
        self.mac_strobes = 0
        self.mac_outcomes: Dict[str, int] = defaultdict(int)
        self.forwarded_strobes = 0
        self.warnings: List[str] = []

    def _flow(self, source: int, dest: int) -> _FlowState:
        key = flow_key(source, dest)
        state = self._flows.get(key)
        if state is None:
            state = self._flows[key] = _FlowState(source, dest)
        return state

    def generated(self, source: int, dest: int, sent: bool):
        state = self._flow(source, dest)
        if sent:
            state.generated += 1
        else:
            state.skipped += 1

    def delivered(self, origin: int, dest: int, seq: int, route: Iterable[int], latency_us: int):
        state = self._flow(origin, dest)
        if seq in state.delivered:
            state.duplicates += 1
            return
        state.delivered[seq] = (int(latency_us), tuple(route))

    def drop(self, kind: str, count: int = 1):
        self._drops[kind] = self._drops.get(kind, 0) + count

    def strobes(self, count: int = 1):
        self.mac_strobes += count

    def outcome(self, outcome: str, strobes: int, count: int = 1):
        self.mac_outcomes[outcome] += count
        if outcome == "FORWARDED":
            self.forwarded_strobes += strobes

    def outcome_totals(self, counts: Dict[str, int], forwarded_strobes: int):
        """运行时按节点计数累加"""
        for outcome, count in counts.items():
            if count:
                self.mac_outcomes[outcome] += count
        self.forwarded_strobes += forwarded_strobes

    def node(self, node_id: int, energy_final: Dict[str, Any], node_final: Dict[str, Any]):
        duration = max(1, self.duration_us)
        time_us = energy_final["time_us"]
        radio = sum(time_us.get(a, 0) for a in RADIO_ACTIVITIES)
        mac = node_final["mac"]
        self._nodes[node_id] = NodeMetrics(
            node=node_id,
            mode=energy_final["mode"],
            duty_cycle=radio / duration,
            on_fraction=energy_final["on_time_us"] / duration,
            off_intervals=energy_final["off_intervals"],
            level_mj=energy_final["level_mj"],
            consumed_mj=dict(energy_final["consumed_mj"]),
            strobes=mac["strobes"],
            attempts=dict(mac["outcomes"]),
        )

    def build(self, partial: bool = False) -> MetricsSummary:
        flows = {}
        duplicates = 0
        for key, state in self._flows.items():
            latencies = [lat for lat, _ in state.delivered.values()]
            routes = [route for _, route in state.delivered.values()]
            hist: Dict[int, int] = defaultdict(int)
            for route in routes:
                hist[len(route) - 1] += 1
            duplicates += state.duplicates
            flows[key] = FlowMetrics(
                source=state.source,
                dest=state.dest,
                generated=state.generated,
                skipped=state.skipped,
                delivered=len(state.delivered),
                duplicates=state.duplicates,
                delivery_ratio=min(1.0, len(state.delivered) / state.generated) if state.generated else 0.0,
                latency_p50_s=float(np.percentile(latencies, 50)) / 1e6 if latencies else None,
                latency_p95_s=float(np.percentile(latencies, 95)) / 1e6 if latencies else None,
                hop_histogram=dict(sorted(hist.items())),
                route_diversity=len(set(routes)),
            )
        forwarded = self.mac_outcomes.get("FORWARDED", 0)
        return MetricsSummary(
            scenario=self.scenario,
            seed=self.seed,
            duration_s=self.duration_us / 1e6,
            flows=dict(sorted(flows.items())),
            nodes=dict(sorted(self._nodes.items())),
            drops=dict(sorted(self._drops.items())),
            duplicate_deliveries=duplicates,
            mac_strobes=self.mac_strobes,
            mac_outcomes=dict(sorted(self.mac_outcomes.items())),
            mean_strobes_per_forward=self.forwarded_strobes / forwarded if forwarded else None,
            partial=partial,
            warnings=list(self.warnings),
        )


@dataclass
class TraceExports:
    """CSV导出数据"""
    energy: Dict[int, List[Tuple[float, float]]] = field(default_factory=lambda: defaultdict(list))
    routes: Dict[str, List[Tuple[int, str]]] = field(default_factory=lambda: defaultdict(list))


def flows_from_header(header: Dict[str, Any]) -> List[Tuple[int, int]]:
    scenario = header.get("scenario", {})
    sink = scenario.get("sink", 0)
    return [
        (flow["source"], sink if flow.get("dest") is None else flow["dest"])
        for flow in scenario.get("flows", [])
    ]


def summarize_records(
    header: Dict[str, Any], records: Iterable[Dict[str, Any]]
) -> Tuple[MetricsBuilder, TraceExports]:
    """只用追踪记录重算汇总"""
    builder = MetricsBuilder(
        header.get("scenario", {}).get("name", "scenario"),
        header.get("seed", 0),
        header.get("duration_us", 0),
        flows_from_header(header),
    )
    exports = TraceExports()
    energy_final: Dict[int, Dict[str, Any]] = {}
    node_final: Dict[int, Dict[str, Any]] = {}
    drop_kinds = {kind.value for kind in DROP_KINDS}

    for record in records:
        kind = record.get("kind")
        node = record.get("node")
        t = record.get("t", 0)
        if kind == TraceKind.ORIGINATE.value:
            builder.generated(node, record["dest"], True)
        elif kind == TraceKind.APP_SKIP.value:
            builder.generated(node, record["dest"], False)
        elif kind == TraceKind.DELIVER.value:
            builder.delivered(record["origin"], record["dest"], record["pseq"], record["hops"], record["latency_us"])
            key = flow_key(record["origin"], record["dest"])
            exports.routes[key].append((record["pseq"], "-".join(str(h) for h in record["hops"])))
        elif kind in drop_kinds:
            builder.drop(kind)
        elif kind == TraceKind.MAC_STROBE.value:
            builder.strobes()
        elif kind == TraceKind.MAC_OUTCOME.value:
            builder.outcome(record["outcome"], record.get("strobes", 0))
        elif kind in (TraceKind.ENERGY.value, TraceKind.LIFECYCLE.value):
            exports.energy[node].append((t / 1e6, record["level_mj"]))
        elif kind == TraceKind.ENERGY_FINAL.value:
            energy_final[node] = record
            exports.energy[node].append((t / 1e6, record["level_mj"]))
        elif kind == TraceKind.NODE_FINAL.value:
            node_final[node] = record

    for node_id in sorted(energy_final):
        if node_id in node_final:
            builder.node(node_id, energy_final[node_id], node_final[node_id])
    return builder, exports


def summarize_trace(path: Union[str, Path]) -> Tuple[MetricsSummary, TraceExports]:
    """summarize：由追踪文件重算汇总；截断的追踪得到 partial 汇总并告警"""
    reader = TraceReader(path)
    builder, exports = summarize_records(reader.header, reader)
    if reader.truncated:
        message = f"追踪文件不完整: {path}（已读 {reader.count} 条，坏行 {reader.bad_lines}）"
        logger.warning(message)
        builder.warnings.append(message)
    return builder.build(partial=reader.truncated), exports


def shutdown_precursors(records: Iterable[Dict[str, Any]], node: int, window_us: int) -> Tuple[int, int]:
    """节点每次断电前 window_us 内是否有收发活动，返回 (有活动的次数, 断电总次数)"""
    last_activity: Optional[int] = None
    preceded = 0
    total = 0
    for record in records:
        if record.get("node") != node:
            continue
        kind = record.get("kind")
        if kind in _ACTIVITY_KINDS:
            last_activity = record["t"]
        elif kind == TraceKind.LIFECYCLE.value and record.get("state") == "OFF" and record["t"] > 0:
            total += 1
            if last_activity is not None and record["t"] - last_activity <= window_us:
                preceded += 1
    return preceded, total
