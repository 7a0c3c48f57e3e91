"""
节点能量模型
采集、存储、按活动计费，以及带迟滞的 ON/OFF 生命周期

内部全部用整数：能量单位飞焦(fJ)，功率单位纳瓦(nW)，时间单位微秒(µs)，
nW × µs = fJ，因此能量守恒和阈值穿越时刻都是精确的。
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from core.engine import PRIO_ENERGY, SimEngine
from core.errors import ScenarioError
from models.scenario import EnergyMode
from models.trace import TraceKind
from utils.logger import NodeLogger

FJ_PER_MJ = 10 ** 12
NW_PER_MW = 10 ** 6


def mj_to_fj(mj: float) -> int:
    return int(round(mj * FJ_PER_MJ))


def fj_to_mj(fj: int) -> float:
    return fj / FJ_PER_MJ


def mw_to_nw(mw: float) -> int:
    return int(round(mw * NW_PER_MW))


class Activity(str, Enum):
    """耗能活动"""
    SLEEP = "SLEEP"
    IDLE_LISTEN = "IDLE_LISTEN"
    RX = "RX"
    TX = "TX"
    CPU = "CPU"


class LifecycleState(str, Enum):
    """节点供电状态"""
    ON = "ON"
    OFF = "OFF"


class Transition(str, Enum):
    """生命周期检查结果"""
    NONE = "none"
    TO_OFF = "to_OFF"
    TO_ON = "to_ON"


@dataclass(frozen=True, slots=True)
class ActivityCost:
    """活动功率"""
    activity: Activity
    power_nw: int

    @classmethod
    def from_mw(cls, activity: Activity, power_mw: float) -> "ActivityCost":
        return cls(activity, mw_to_nw(power_mw))

    @property
    def power_mw(self) -> float:
        return self.power_nw / NW_PER_MW


@dataclass(frozen=True, slots=True)
class EnergyStore:
    """储能状态：0 <= level <= capacity，e_off < e_on <= capacity"""
    capacity_fj: int
    level_fj: int
    e_on_fj: int
    e_off_fj: int
    harvest_nw: int

    def __post_init__(self):
        if not (self.e_off_fj < self.e_on_fj <= self.capacity_fj):
            raise ValueError("迟滞阈值必须满足 e_off < e_on <= capacity")
        if not (0 <= self.level_fj <= self.capacity_fj):
            raise ValueError(f"能量 {self.level_fj} fJ 超出 [0, capacity]")

    @classmethod
    def from_mj(
        cls,
        capacity_mj: float,
        level_mj: float,
        e_on_mj: float,
        e_off_mj: float,
        harvest_mw: float,
    ) -> "EnergyStore":
        return cls(
            capacity_fj=mj_to_fj(capacity_mj),
            level_fj=mj_to_fj(level_mj),
            e_on_fj=mj_to_fj(e_on_mj),
            e_off_fj=mj_to_fj(e_off_mj),
            harvest_nw=mw_to_nw(harvest_mw),
        )

    @property
    def level_mj(self) -> float:
        return fj_to_mj(self.level_fj)


@dataclass
class NodeLifecycleState:
    """生命周期状态"""
    state: LifecycleState
    last_transition: int = 0
    cumulative_on_us: int = 0

    def on_time_until(self, now: int) -> int:
        """截至 now 的累计 ON 时间"""
        if self.state == LifecycleState.ON:
            return self.cumulative_on_us + (now - self.last_transition)
        return self.cumulative_on_us


@dataclass
class EnergyLedger:
    """能量账本，按活动记录消耗和时长"""
    initial_fj: int
    harvested_fj: int = 0
    overflow_fj: int = 0  # 存满后溢出的采集能量
    underflow_fj: int = 0  # 存空后无法支付的消耗
    consumed_fj: Dict[Activity, int] = field(default_factory=lambda: {a: 0 for a in Activity})
    time_us: Dict[Activity, int] = field(default_factory=lambda: {a: 0 for a in Activity})

    def reconstruct_level_fj(self) -> int:
        """由账本重建当前能量"""
        return (
            self.initial_fj
            + self.harvested_fj
            - sum(self.consumed_fj.values())
            - self.overflow_fj
            + self.underflow_fj
        )

    def to_record(self) -> Dict[str, object]:
        return {
            "initial_mj": fj_to_mj(self.initial_fj),
            "harvested_mj": fj_to_mj(self.harvested_fj),
            "overflow_mj": fj_to_mj(self.overflow_fj),
            "underflow_mj": fj_to_mj(self.underflow_fj),
            "consumed_mj": {a.value: fj_to_mj(v) for a, v in self.consumed_fj.items()},
            "time_us": {a.value: v for a, v in self.time_us.items()},
        }


def _clamp(store: EnergyStore, raw_fj: int, ledger: Optional[EnergyLedger]) -> int:
    if raw_fj > store.capacity_fj:
        if ledger is not None:
            ledger.overflow_fj += raw_fj - store.capacity_fj
        return store.capacity_fj
    if raw_fj < 0:
        if ledger is not None:
            ledger.underflow_fj += -raw_fj
        return 0
    return raw_fj


def accrue(
    store: EnergyStore,
    activity: ActivityCost,
    duration_us: int,
    ledger: Optional[EnergyLedger] = None,
) -> EnergyStore:
    """按恒定净功率积分 duration_us 并截断到 [0, capacity]

    区间内净功率恒定，能量轨迹单调，因此区间末端截断等于连续截断。
    """
    if duration_us <= 0:
        return store
    harvested = store.harvest_nw * duration_us
    consumed = activity.power_nw * duration_us
    if ledger is not None:
        ledger.harvested_fj += harvested
        ledger.consumed_fj[activity.activity] += consumed
        ledger.time_us[activity.activity] += duration_us
    level = _clamp(store, store.level_fj + harvested - consumed, ledger)
    return replace(store, level_fj=level)


def debit(
    store: EnergyStore,
    activity: ActivityCost,
    duration_us: int,
    ledger: Optional[EnergyLedger] = None,
) -> EnergyStore:
    """瞬时扣除一段活动的能量（不计采集），用于CPU处理开销"""
    if duration_us <= 0:
        return store
    consumed = activity.power_nw * duration_us
    if ledger is not None:
        ledger.consumed_fj[activity.activity] += consumed
        ledger.time_us[activity.activity] += duration_us
    return replace(store, level_fj=_clamp(store, store.level_fj - consumed, ledger))


def lifecycle_check(store: EnergyStore, state: NodeLifecycleState) -> Transition:
    """ON → OFF 当且仅当 level < e_off；OFF → ON 当且仅当 level >= e_on"""
    if state.state == LifecycleState.ON and store.level_fj < store.e_off_fj:
        return Transition.TO_OFF
    if state.state == LifecycleState.OFF and store.level_fj >= store.e_on_fj:
        return Transition.TO_ON
    return Transition.NONE


def _time_to_reach(level_fj: int, target_fj: int, net_nw: int) -> Optional[int]:
    """上升到 >= target 的最早整数微秒；永远达不到返回None"""
    if level_fj >= target_fj:
        return 0
    if net_nw <= 0:
        return None
    return -((level_fj - target_fj) // net_nw)


def _time_to_fall_below(level_fj: int, threshold_fj: int, net_nw: int) -> Optional[int]:
    """下降到 < threshold 的最早整数微秒"""
    if level_fj < threshold_fj:
        return 0
    if net_nw >= 0:
        return None
    return (level_fj - threshold_fj) // (-net_nw) + 1


def time_to_threshold(store: EnergyStore, target_mj: float, activity: ActivityCost) -> Optional[int]:
    """恒定净功率下达到 target 的精确时刻（微秒）；None 表示永远达不到"""
    target_fj = mj_to_fj(target_mj)
    if target_fj > store.capacity_fj:
        return None
    return _time_to_reach(store.level_fj, target_fj, store.harvest_nw - activity.power_nw)


def load_harvest_trace(path: str) -> List[Tuple[int, int]]:
    """读取阶梯采集曲线 CSV（time_s,power_mw，带表头），返回 [(µs, nW)]"""
    trace_path = Path(path)
    if not trace_path.exists():
        raise ScenarioError(f"采集曲线文件不存在: {path}", field_name="energy.harvest_trace", rule="file exists")
    try:
        data = np.loadtxt(trace_path, delimiter=",", skiprows=1, ndmin=2, dtype=float)
    except ValueError as e:
        raise ScenarioError(
            f"采集曲线无法解析: {e}", field_name="energy.harvest_trace", rule="CSV time_s,power_mw"
        )
    if data.shape[1] != 2:
        raise ScenarioError("采集曲线必须恰好两列", field_name="energy.harvest_trace", rule="CSV time_s,power_mw")
    times = data[:, 0]
    if np.any(times < 0) or np.any(np.diff(times) < 0) or np.any(data[:, 1] < 0):
        raise ScenarioError(
            "采集曲线时间必须非负且不减，功率非负",
            field_name="energy.harvest_trace",
            rule="monotonic non-negative",
        )
    return [(int(round(t * 1e6)), mw_to_nw(p)) for t, p in data]


class EnergyModel:
    """单个节点的有状态能量管理器

    负责在活动切换时积分、维护账本、精确调度阈值穿越事件，
    并在生命周期变化时回调节点。
    """

    def __init__(
        self,
        node_id: int,
        engine: SimEngine,
        store: EnergyStore,
        costs: Dict[Activity, ActivityCost],
        mode: EnergyMode = EnergyMode.INTERMITTENT,
        harvest_steps: Optional[List[Tuple[int, int]]] = None,
        trace=None,
    ):
        self.node_id = node_id
        self.engine = engine
        self.store = store
        self.costs = costs
        self.mode = mode
        self.trace = trace
        self.ledger = EnergyLedger(initial_fj=store.level_fj)
        self.lifecycle = NodeLifecycleState(state=LifecycleState.ON)
        self.activity = Activity.SLEEP
        self.transitions: List[Tuple[int, Transition, int]] = []
        self.off_intervals = 0
        self._harvest_steps = harvest_steps or []
        self._last_update = 0
        self._threshold_event = None
        self._target = ("energy", node_id)
        self._logger = NodeLogger(node_id, "energy")

        # 生命周期回调，由节点装配时设置
        self.on_power_off: Callable[[int], None] = lambda now: None
        self.on_power_on: Callable[[int], None] = lambda now: None

    @property
    def is_on(self) -> bool:
        return self.lifecycle.state == LifecycleState.ON

    @property
    def intermittent(self) -> bool:
        return self.mode == EnergyMode.INTERMITTENT

    def start(self, now: int) -> bool:
        """仿真开始：电量不低于 e_on 的节点上电；返回是否上电"""
        self._last_update = now
        if self.intermittent and self.store.level_fj < self.store.e_on_fj:
            self.lifecycle = NodeLifecycleState(state=LifecycleState.OFF, last_transition=now)
        else:
            self.lifecycle = NodeLifecycleState(state=LifecycleState.ON, last_transition=now)
        for at, power_nw in self._harvest_steps:
            if at <= now:
                self.store = replace(self.store, harvest_nw=power_nw)
            else:
                self.engine.schedule(
                    at,
                    lambda p=power_nw: self.set_harvest(p, self.engine.now),
                    priority=PRIO_ENERGY,
                    target=self._target,
                    kind="harvest_step",
                )
        self._emit_lifecycle(now)
        self._reschedule(now)
        return self.is_on

    def sync(self, now: int):
        """把能量积分到 now"""
        elapsed = now - self._last_update
        if elapsed > 0:
            self.store = accrue(self.store, self.costs[self.activity], elapsed, self.ledger)
            self._last_update = now

    def level_fj(self, now: int) -> int:
        self.sync(now)
        return self.store.level_fj

    def level_mj(self, now: int) -> float:
        return fj_to_mj(self.level_fj(now))

    def headroom_fj(self, now: int) -> int:
        """高于 e_off 的余量"""
        return self.level_fj(now) - self.store.e_off_fj

    def set_activity(self, activity: Activity, now: int):
        """切换活动；OFF节点保持SLEEP"""
        if not self.is_on:
            activity = Activity.SLEEP
        if activity == self.activity:
            return
        self.sync(now)
        self.activity = activity
        self._reschedule(now)

    def charge_cpu(self, now: int, duration_us: int):
        """CPU处理开销，瞬时扣除"""
        if duration_us <= 0 or not self.is_on:
            return
        self.sync(now)
        self.store = debit(self.store, self.costs[Activity.CPU], duration_us, self.ledger)
        self._reschedule(now)

    def set_harvest(self, harvest_nw: int, now: int):
        """采集功率阶跃"""
        self.sync(now)
        self.store = replace(self.store, harvest_nw=harvest_nw)
        self._reschedule(now)

    def time_until_headroom(self, headroom_fj: int, now: int) -> Optional[int]:
        """按睡眠功率估计余量达到 headroom 的时间（微秒）"""
        self.sync(now)
        target = min(self.store.e_off_fj + headroom_fj, self.store.capacity_fj)
        net = self.store.harvest_nw - self.costs[Activity.SLEEP].power_nw
        return _time_to_reach(self.store.level_fj, target, net)

    def _reschedule(self, now: int):
        """重新调度下一次阈值穿越"""
        self.engine.cancel(self._threshold_event)
        self._threshold_event = None
        if not self.intermittent:
            return
        net = self.store.harvest_nw - self.costs[self.activity].power_nw
        if self.is_on:
            delay = _time_to_fall_below(self.store.level_fj, self.store.e_off_fj, net)
        else:
            delay = _time_to_reach(self.store.level_fj, self.store.e_on_fj, net)
        if delay is None:
            return
        self._threshold_event = self.engine.schedule(
            now + delay,
            self._on_threshold,
            priority=PRIO_ENERGY,
            target=self._target,
            kind="energy_threshold",
        )

    def _on_threshold(self):
        now = self.engine.now
        self._threshold_event = None
        self.sync(now)
        transition = lifecycle_check(self.store, self.lifecycle)
        if transition == Transition.TO_OFF:
            self._power_off(now)
        elif transition == Transition.TO_ON:
            self._power_on(now)
        self._reschedule(now)

    def _power_off(self, now: int):
        self.lifecycle.cumulative_on_us += now - self.lifecycle.last_transition
        self.lifecycle.state = LifecycleState.OFF
        self.lifecycle.last_transition = now
        self.off_intervals += 1
        self.transitions.append((now, Transition.TO_OFF, self.store.level_fj))
        self._emit_lifecycle(now)
        self.on_power_off(now)
        # 回调里可能已经切换过活动，这里兜底回到SLEEP
        self.sync(now)
        self.activity = Activity.SLEEP
        self._logger.debug(f"断电，剩余 {self.store.level_mj:.3f} mJ", now)

    def _power_on(self, now: int):
        self.lifecycle.state = LifecycleState.ON
        self.lifecycle.last_transition = now
        self.transitions.append((now, Transition.TO_ON, self.store.level_fj))
        self._emit_lifecycle(now)
        self._logger.debug(f"上电，能量 {self.store.level_mj:.3f} mJ", now)
        self.on_power_on(now)

    def _emit_lifecycle(self, now: int):
        if self.trace is not None:
            self.trace.emit(
                now,
                self.node_id,
                TraceKind.LIFECYCLE,
                state=self.lifecycle.state.value,
                level_mj=self.store.level_mj,
            )

    def sample(self, now: int, reason: str = "sample"):
        """写一条能量采样"""
        self.sync(now)
        if self.trace is not None:
            self.trace.emit(now, self.node_id, TraceKind.ENERGY, level_mj=self.store.level_mj, reason=reason)

    def finalize(self, now: int) -> Dict[str, object]:
        """运行结束：积分到 now，返回 energy_final 记录字段"""
        self.sync(now)
        self.engine.cancel(self._threshold_event)
        self._threshold_event = None
        record = self.ledger.to_record()
        record.update(
            {
                "level_mj": self.store.level_mj,
                "reconstructed_mj": fj_to_mj(self.ledger.reconstruct_level_fj()),
                "on_time_us": self.lifecycle.on_time_until(now),
                "off_intervals": self.off_intervals,
                "mode": self.mode.value,
            }
        )
        return record
