"""
场景文件数据模型
严格模式：每一节都拒绝未知字段，所有默认值在加载时物化
"""

from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class StrictModel(BaseModel):
    """拒绝未知字段的基类"""
    model_config = ConfigDict(extra="forbid", frozen=True)


class TopologyKind(str, Enum):
    """拓扑类型"""
    EXPLICIT = "explicit"
    LINE = "line"
    GRID = "grid"
    RANDOM = "random"


class EnergyMode(str, Enum):
    """节点供能方式"""
    INTERMITTENT = "intermittent"
    ALWAYS_ON = "always_on"


class DeferPolicy(str, Enum):
    """发送推迟策略"""
    EWMA = "ewma"
    NONE = "none"


class RoutingProtocolKind(str, Enum):
    """路由协议"""
    ORPL = "orpl"  # 上行 + 路由集合下行
    ORW = "orw"  # 仅上行


class TrafficModel(str, Enum):
    """流量模型"""
    PERIODIC = "periodic"
    POISSON = "poisson"


class TopologySpec(StrictModel):
    """拓扑：显式坐标或生成器"""
    kind: TopologyKind = Field(..., description="拓扑类型")
    positions: Optional[Dict[int, Tuple[float, float]]] = Field(None, description="显式坐标（米）")
    n: Optional[int] = Field(None, ge=1, le=1000, description="节点数（line/random）")
    rows: Optional[int] = Field(None, ge=1, description="网格行数")
    cols: Optional[int] = Field(None, ge=1, description="网格列数")
    spacing_m: float = Field(20.0, gt=0, description="line/grid 节点间距")
    area_m: float = Field(100.0, gt=0, description="random 方形区域边长")

    @model_validator(mode="after")
    def _check_kind_fields(self):
        if self.kind == TopologyKind.EXPLICIT and not self.positions:
            raise ValueError("topology.positions: explicit 拓扑必须给出坐标")
        if self.kind in (TopologyKind.LINE, TopologyKind.RANDOM) and self.n is None:
            raise ValueError(f"topology.n: {self.kind.value} 拓扑必须给出节点数")
        if self.kind == TopologyKind.GRID and (self.rows is None or self.cols is None):
            raise ValueError("topology.rows/cols: grid 拓扑必须给出行列数")
        return self


class ChannelSpec(StrictModel):
    """无线信道参数"""
    comm_range_m: float = Field(30.0, gt=0, description="单位圆盘通信半径")
    bitrate_bps: int = Field(250_000, gt=0, description="比特率")
    p_loss: float = Field(0.0, ge=0.0, lt=1.0, description="独立逐帧擦除概率")


class PowerSpec(StrictModel):
    """各活动功率（mW）"""
    sleep: float = Field(0.005, ge=0)
    idle_listen: float = Field(2.0, ge=0)
    rx: float = Field(6.0, ge=0)
    tx: float = Field(12.0, ge=0)
    cpu: float = Field(1.0, ge=0)

    @model_validator(mode="after")
    def _check_order(self):
        if not (self.tx >= self.rx >= self.idle_listen >= self.sleep):
            raise ValueError("energy.power_mw: 功率必须满足 TX >= RX >= IDLE_LISTEN >= SLEEP")
        return self


class EnergySpec(StrictModel):
    """全局能量参数"""
    mode: EnergyMode = EnergyMode.INTERMITTENT
    capacity_mj: float = Field(10.0, gt=0)
    e_on_mj: float = Field(8.0, gt=0)
    e_off_mj: float = Field(2.0, ge=0)
    initial_mj: Optional[float] = Field(None, ge=0, description="初始能量，缺省为 e_on")
    harvest_mw: float = Field(1.0, ge=0)
    harvest_trace: Optional[str] = Field(None, description="CSV time_s,power_mw 阶梯采集曲线")
    power_mw: PowerSpec = Field(default_factory=PowerSpec)
    cpu_time_per_packet_s: float = Field(0.001, ge=0)
    sink_always_on: bool = True
    persist_routing_state: bool = True
    sample_interval_s: float = Field(10.0, gt=0, description="能量采样间隔")

    @model_validator(mode="after")
    def _check_hysteresis(self):
        if not (self.e_off_mj < self.e_on_mj <= self.capacity_mj):
            raise ValueError("energy.e_on_mj/e_off_mj: 迟滞阈值必须满足 e_off < e_on <= capacity")
        if self.initial_mj is not None and self.initial_mj > self.capacity_mj:
            raise ValueError("energy.initial_mj: 初始能量不能超过容量")
        return self

    @property
    def effective_initial_mj(self) -> float:
        return self.e_on_mj if self.initial_mj is None else self.initial_mj


class NodeOverride(StrictModel):
    """单节点能量覆盖"""
    mode: Optional[EnergyMode] = None
    harvest_mw: Optional[float] = Field(None, ge=0)
    harvest_trace: Optional[str] = None
    initial_mj: Optional[float] = Field(None, ge=0)


class MacSpec(StrictModel):
    """占空比MAC参数"""
    wake_interval_s: float = Field(1.0, gt=0)
    listen_len_s: float = Field(0.020, gt=0)
    ack_window_s: float = Field(0.002, gt=0)
    max_duration_s: float = Field(1.5, gt=0)
    backoff_slots: int = Field(8, ge=1)
    turnaround_s: float = Field(0.000192, ge=0)
    defer_policy: DeferPolicy = DeferPolicy.EWMA
    accept_reserve_mj: float = Field(3.0, ge=0, description="低于 e_off + 该值时不参与竞争")
    send_reserve_mj: float = Field(2.0, ge=0, description="低于 e_off + 该值时推迟发起尝试")
    strobe_guard_mj: float = Field(0.5, ge=0, description="选通中低于 e_off + 该值时结束尝试，0为关闭")
    accepted_cache: int = Field(32, ge=1, description="已接受分组缓存（用于重复ACK）")

    @model_validator(mode="after")
    def _check_timing(self):
        if self.listen_len_s >= self.wake_interval_s:
            raise ValueError("mac.listen_len_s: 侦听窗口必须短于唤醒周期")
        if self.max_duration_s < self.wake_interval_s + self.listen_len_s:
            raise ValueError("mac.max_duration_s: 必须满足 max_duration >= wake_interval + listen_len")
        if self.turnaround_s >= self.ack_window_s:
            raise ValueError("mac.turnaround_s: 收发切换时间必须小于 ack_window")
        return self


class NeighborSpec(StrictModel):
    """邻居表参数"""
    ewma_alpha: float = Field(0.2, gt=0, le=1)
    link_window: int = Field(16, ge=1)
    stale_factor: float = Field(10.0, gt=0, description="陈旧阈值 = 因子 × max(wake_interval, adv_interval)")


class RoutingSpec(StrictModel):
    """路由参数"""
    protocol: RoutingProtocolKind = RoutingProtocolKind.ORPL
    w: float = Field(0.1, ge=0)
    margin: float = Field(0.5, gt=0)
    p_piggyback: float = Field(0.5, ge=0, le=1)
    adv_interval_s: float = Field(30.0, gt=0)
    adv_on_change: bool = True
    set_ttl_s: float = Field(300.0, gt=0)
    ttl_default: int = Field(16, ge=1, le=255)
    max_set_size: int = Field(64, ge=1, le=126)
    queue_cap: int = Field(16, ge=1)
    max_retries: int = Field(8, ge=0)
    verify_edc: bool = False
    downward_progress: bool = Field(False, description="下行接受额外要求本节点EDC高于发送者")


class FlowSpec(StrictModel):
    """一条业务流"""
    source: int
    dest: Optional[int] = Field(None, description="缺省为汇聚节点")
    model: TrafficModel = TrafficModel.PERIODIC
    period_s: float = Field(10.0, gt=0)
    jitter_s: float = Field(0.0, ge=0)
    rate_hz: float = Field(0.1, gt=0)
    count: Optional[int] = Field(None, ge=0)
    start_s: float = Field(0.0, ge=0)
    payload_len: int = Field(20, ge=0, le=100)

    @model_validator(mode="after")
    def _check_jitter(self):
        if self.model == TrafficModel.PERIODIC and self.jitter_s >= self.period_s:
            raise ValueError("flows.jitter_s: 抖动必须小于周期")
        return self


class TraceSpec(StrictModel):
    """追踪输出开关"""
    signals: bool = True
    dump_neighbors: bool = False


class Scenario(StrictModel):
    """完整场景"""
    name: str = "scenario"
    seed: int = Field(1, ge=0, lt=2 ** 64)
    duration_s: float = Field(..., gt=0)
    sink: int = 0
    topology: TopologySpec
    channel: ChannelSpec = Field(default_factory=ChannelSpec)
    energy: EnergySpec = Field(default_factory=EnergySpec)
    nodes: Dict[int, NodeOverride] = Field(default_factory=dict)
    mac: MacSpec = Field(default_factory=MacSpec)
    neighbor: NeighborSpec = Field(default_factory=NeighborSpec)
    routing: RoutingSpec = Field(default_factory=RoutingSpec)
    flows: List[FlowSpec] = Field(default_factory=list)
    trace: TraceSpec = Field(default_factory=TraceSpec)

    @field_validator("nodes")
    @classmethod
    def _check_overrides(cls, value: Dict[int, NodeOverride]) -> Dict[int, NodeOverride]:
        for node_id in value:
            if node_id < 0:
                raise ValueError("nodes: 节点号必须非负")
        return value

    @model_validator(mode="after")
    def _check_ids(self):
        ids = set(self.node_ids())
        if self.sink not in ids:
            raise ValueError(f"sink: 汇聚节点 {self.sink} 不存在")
        for node_id, override in self.nodes.items():
            if node_id not in ids:
                raise ValueError(f"nodes: 覆盖项引用了不存在的节点 {node_id}")
            if override.initial_mj is not None and override.initial_mj > self.energy.capacity_mj:
                raise ValueError(f"nodes.{node_id}.initial_mj: 初始能量不能超过容量")
        seen = set()
        for index, flow in enumerate(self.flows):
            dest = self.sink if flow.dest is None else flow.dest
            if flow.source not in ids:
                raise ValueError(f"flows[{index}].source: 节点 {flow.source} 不存在")
            if dest not in ids:
                raise ValueError(f"flows[{index}].dest: 节点 {dest} 不存在")
            if dest == flow.source:
                raise ValueError(f"flows[{index}].dest: 源和目的不能相同")
            if (flow.source, dest) in seen:
                raise ValueError(f"flows[{index}]: 重复的 (source, dest) 流")
            seen.add((flow.source, dest))
        return self

    def node_ids(self) -> List[int]:
        """场景中的全部节点号（升序）"""
        topo = self.topology
        if topo.kind == TopologyKind.EXPLICIT:
            return sorted(topo.positions)
        if topo.kind == TopologyKind.GRID:
            return list(range(topo.rows * topo.cols))
        return list(range(topo.n))

    def flow_dest(self, flow: FlowSpec) -> int:
        return self.sink if flow.dest is None else flow.dest

    def node_mode(self, node_id: int) -> EnergyMode:
        override = self.nodes.get(node_id)
        if override is not None and override.mode is not None:
            return override.mode
        if node_id == self.sink and self.energy.sink_always_on:
            return EnergyMode.ALWAYS_ON
        return self.energy.mode

    def node_harvest_mw(self, node_id: int) -> float:
        override = self.nodes.get(node_id)
        if override is not None and override.harvest_mw is not None:
            return override.harvest_mw
        return self.energy.harvest_mw

    def node_harvest_trace(self, node_id: int) -> Optional[str]:
        override = self.nodes.get(node_id)
        if override is not None and override.harvest_trace is not None:
            return override.harvest_trace
        return self.energy.harvest_trace

    def node_initial_mj(self, node_id: int) -> float:
        override = self.nodes.get(node_id)
        if override is not None and override.initial_mj is not None:
            return override.initial_mj
        return self.energy.effective_initial_mj
