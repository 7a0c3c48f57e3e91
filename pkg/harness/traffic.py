"""
业务流量
周期（带抖动）或泊松到达；源节点断电时记一条 app_skip，不计入交付率分母
"""

from typing import Callable, Dict, Optional

from core.engine import SimEngine, s_to_us
from models.metrics import flow_key
from models.scenario import FlowSpec, TrafficModel
from models.trace import TraceKind
from utils.rng import RngStream


class FlowGenerator:
    """单条业务流"""

    def __init__(
        self,
        index: int,
        flow: FlowSpec,
        dest: int,
        engine: SimEngine,
        originate: Callable[[int, int, int], Optional[object]],
        rng: RngStream,
        end_us: int,
        trace=None,
        on_generated: Optional[Callable[[int, int, bool], None]] = None,
    ):
        self.index = index
        self.flow = flow
        self.source = flow.source
        self.dest = dest
        self.key = flow_key(flow.source, dest)
        self.engine = engine
        self.originate = originate
        self.rng = rng
        self.end_us = end_us
        self.trace = trace
        self.on_generated = on_generated or (lambda source, dest, sent: None)
        self.target = ("flow", index)
        self.emitted = 0
        self.period_us = s_to_us(flow.period_s)
        self._k = 0

    def start(self):
        self._schedule_next(s_to_us(self.flow.start_s))

    def _exhausted(self) -> bool:
        return self.flow.count is not None and self.emitted >= self.flow.count

    def _schedule_next(self, base: int):
        if self._exhausted():
            return
        if self.flow.model == TrafficModel.PERIODIC:
            jitter = int(self.rng.uniform(0.0, s_to_us(self.flow.jitter_s))) if self.flow.jitter_s > 0 else 0
            at = base + self._k * self.period_us + jitter
        else:
            gap = s_to_us(self.rng.exponential(1.0 / self.flow.rate_hz))
            at = (base if self._k == 0 else self.engine.now) + gap
        self._k += 1
        if at > self.end_us:
            return
        self.engine.schedule(max(at, self.engine.now), self._fire, target=self.target, kind="traffic")

    def _fire(self):
        now = self.engine.now
        self.emitted += 1
        packet = self.originate(self.dest, self.flow.payload_len, now)
        if packet is None:
            if self.trace is not None:
                self.trace.emit(now, self.source, TraceKind.APP_SKIP, dest=self.dest)
            self.on_generated(self.source, self.dest, False)
        else:
            self.on_generated(self.source, self.dest, True)
        base = s_to_us(self.flow.start_s)
        self._schedule_next(base)


def build_flows(scenario, engine, nodes: Dict[int, object], streams, end_us: int, trace=None, on_generated=None):
    """为场景中的每条流创建生成器"""
    generators = []
    for index, flow in enumerate(scenario.flows):
        dest = scenario.flow_dest(flow)
        node = nodes[flow.source]
        generators.append(
            FlowGenerator(
                index,
                flow,
                dest,
                engine,
                node.originate,
                streams.stream(flow.source, f"traffic.{dest}"),
                end_us,
                trace=trace,
                on_generated=on_generated,
            )
        )
    return generators
