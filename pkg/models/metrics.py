"""
运行汇总数据模型
运行时计数和追踪重算得到的汇总必须逐字段相等
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field


class FlowMetrics(BaseModel):
    """单条业务流的统计"""
    model_config = ConfigDict(frozen=True)

    source: int
    dest: int
    generated: int = Field(0, description="源节点上电时发起的分组数")
    skipped: int = Field(0, description="源节点断电而跳过的分组数，不计入分母")
    delivered: int = Field(0, description="去重后的交付数")
    duplicates: int = 0
    delivery_ratio: float = Field(0.0, ge=0.0, le=1.0)
    latency_p50_s: Optional[float] = None
    latency_p95_s: Optional[float] = None
    hop_histogram: Dict[int, int] = Field(default_factory=dict)
    route_diversity: int = Field(0, description="不同跳序列的数量")


class NodeMetrics(BaseModel):
    """单个节点的统计"""
    model_config = ConfigDict(frozen=True)

    node: int
    mode: str
    duty_cycle: float = Field(..., description="射频非睡眠时间占比")
    on_fraction: float = Field(..., description="生命周期ON时间占比")
    off_intervals: int
    level_mj: float
    consumed_mj: Dict[str, float]
    strobes: int
    attempts: Dict[str, int]


class MetricsSummary(BaseModel):
    """一次运行的汇总"""
    model_config = ConfigDict(frozen=True)

    scenario: str
    seed: int
    duration_s: float
    flows: Dict[str, FlowMetrics] = Field(default_factory=dict)
    nodes: Dict[int, NodeMetrics] = Field(default_factory=dict)
    drops: Dict[str, int] = Field(default_factory=dict)
    duplicate_deliveries: int = 0
    mac_strobes: int = 0
    mac_outcomes: Dict[str, int] = Field(default_factory=dict)
    mean_strobes_per_forward: Optional[float] = None
    partial: bool = False
    warnings: List[str] = Field(default_factory=list)

    def flow(self, source: int, dest: int) -> FlowMetrics:
        return self.flows[flow_key(source, dest)]

    @property
    def total_delivered(self) -> int:
        return sum(f.delivered for f in self.flows.values())


def flow_key(source: int, dest: int) -> str:
    return f"{source}->{dest}"
