"""
传感器节点装配
把能量模型、MAC、信号总线、邻居表、路由表、路由协议和发现协议接在一起，
并统一处理上电/断电
"""

from typing import Any, Dict, List, Optional, Tuple

from core.channel import WirelessChannel
from core.energy import Activity, ActivityCost, EnergyModel, EnergyStore
from core.engine import SimEngine, s_to_us
from models.scenario import DeferPolicy, PowerSpec, RoutingProtocolKind, Scenario
from models.trace import TraceKind
from protocols.base_layer import ProtocolLayer
from protocols.discovery import Discovery
from protocols.interfaces import IDeferTransmission, NoDeferral
from protocols.mac import AnycastAttempt, OpportunisticMac
from protocols.neighbor_table import NeighborTable
from protocols.routing import RoutingProtocol
from protocols.routing_set import RoutingSetTable
from protocols.routing_table import RoutingTable
from utils.logger import NodeLogger
from utils.rng import RngStreams
from utils.signal_bus import SignalBus


def build_costs(power: PowerSpec) -> Dict[Activity, ActivityCost]:
    """场景功率表 → 各活动功率"""
    return {
        Activity.SLEEP: ActivityCost.from_mw(Activity.SLEEP, power.sleep),
        Activity.IDLE_LISTEN: ActivityCost.from_mw(Activity.IDLE_LISTEN, power.idle_listen),
        Activity.RX: ActivityCost.from_mw(Activity.RX, power.rx),
        Activity.TX: ActivityCost.from_mw(Activity.TX, power.tx),
        Activity.CPU: ActivityCost.from_mw(Activity.CPU, power.cpu),
    }


class SensorNode:
    """一个间歇供电的传感器节点"""

    def __init__(
        self,
        node_id: int,
        scenario: Scenario,
        engine: SimEngine,
        channel: WirelessChannel,
        streams: RngStreams,
        harvest_steps: Optional[List[Tuple[int, int]]] = None,
        trace=None,
    ):
        self.node_id = node_id
        self.engine = engine
        self.channel = channel
        self.trace = trace
        self.target = ("node", node_id)
        self.logger = NodeLogger(node_id, "node")

        energy_spec = scenario.energy
        mac_spec = scenario.mac
        routing_spec = scenario.routing

        store = EnergyStore.from_mj(
            capacity_mj=energy_spec.capacity_mj,
            level_mj=scenario.node_initial_mj(node_id),
            e_on_mj=energy_spec.e_on_mj,
            e_off_mj=energy_spec.e_off_mj,
            harvest_mw=scenario.node_harvest_mw(node_id),
        )
        self.energy = EnergyModel(
            node_id,
            engine,
            store,
            build_costs(energy_spec.power_mw),
            mode=scenario.node_mode(node_id),
            harvest_steps=harvest_steps,
            trace=trace,
        )

        wake_us = s_to_us(mac_spec.wake_interval_s)
        adv_us = s_to_us(routing_spec.adv_interval_s)
        self.signal_bus = SignalBus(node_id)
        self.neighbors = NeighborTable(
            node_id,
            wake_interval_us=wake_us,
            listen_len_us=s_to_us(mac_spec.listen_len_s),
            stale_after_us=int(scenario.neighbor.stale_factor * max(wake_us, adv_us)),
            ewma_alpha=scenario.neighbor.ewma_alpha,
            link_window=scenario.neighbor.link_window,
        )
        self.routing_set: Optional[RoutingSetTable] = None
        if routing_spec.protocol == RoutingProtocolKind.ORPL:
            self.routing_set = RoutingSetTable(node_id, s_to_us(routing_spec.set_ttl_s), routing_spec.max_set_size)
        self.table = RoutingTable(
            node_id,
            scenario.sink,
            self.neighbors,
            w=routing_spec.w,
            margin=routing_spec.margin,
            routing_set=self.routing_set,
            downward_progress=routing_spec.downward_progress,
            verify_edc=routing_spec.verify_edc,
            trace=trace,
        )

        deferrer: IDeferTransmission = self.neighbors if mac_spec.defer_policy == DeferPolicy.EWMA else NoDeferral()
        self.mac = OpportunisticMac(
            node_id,
            engine,
            channel,
            self.energy,
            mac_spec,
            phase_rng=streams.stream(node_id, "mac.phase"),
            backoff_rng=streams.stream(node_id, "mac.backoff"),
            signal_bus=self.signal_bus,
            deferrer=deferrer,
            intermittent=self.energy.intermittent,
            trace=trace,
            trace_signals=scenario.trace.signals,
        )
        self.routing = RoutingProtocol(
            node_id,
            scenario.sink,
            engine,
            self.mac,
            self.energy,
            self.neighbors,
            self.table,
            self.routing_set,
            routing_spec,
            rng=streams.stream(node_id, "routing.backoff"),
            piggyback_rng=streams.stream(node_id, "routing.piggyback"),
            cpu_time_us=s_to_us(energy_spec.cpu_time_per_packet_s),
            persist_state=energy_spec.persist_routing_state,
            trace=trace,
        )
        self.discovery = Discovery(
            node_id,
            engine,
            self.mac,
            self.routing,
            routing_spec,
            rng=streams.stream(node_id, "discovery"),
            trace=trace,
        )
        self.layers: List[ProtocolLayer] = [self.mac, self.routing, self.discovery]

        # 跨层接线
        self.mac.judge = self.table
        self.mac.add_link_listener(self.neighbors.on_signal)
        self.mac.add_routing_listener(self.routing.on_routing_overheard)
        self.mac.on_deliver = self.routing.on_accepted
        self.mac.on_attempt_done = self._on_attempt_done
        self.mac.on_idle = self._on_mac_idle
        self.energy.on_power_off = self.power_off
        self.energy.on_power_on = self.power_on
        channel.attach(node_id, self.mac)

        self._service_pending = False

    @property
    def is_on(self) -> bool:
        return self.energy.is_on

    def start(self, now: int):
        """仿真开始"""
        if self.energy.start(now):
            self.power_on(now)

    def power_on(self, now: int):
        for layer in self.layers:
            layer.power_on(now)

    def power_off(self, now: int):
        """断电：取消全部节点定时器，中止收发，各层丢弃易失状态"""
        self.engine.cancel_target(self.target)
        self.channel.node_powered_off(self.node_id, now)
        for layer in self.layers:
            layer.power_off(now)
        # 各层断电钩子里可能又排了定时器
        self.engine.cancel_target(self.target)
        self._service_pending = False

    def _on_attempt_done(self, attempt: AnycastAttempt, now: int):
        if attempt.broadcast:
            self.discovery.on_broadcast_done(attempt, now)
        else:
            self.routing.on_attempt_done(attempt, now)

    def _on_mac_idle(self, now: int):
        if self._service_pending:
            return
        self._service_pending = True
        self.engine.schedule(now, self._service, target=self.target, kind="node_service")

    def _service(self):
        now = self.engine.now
        self._service_pending = False
        if not self.is_on or not self.mac.is_idle():
            return
        if self.discovery.pending:
            self.discovery.flush(now)
        if self.mac.is_idle():
            self.routing.request_pump(now)

    def originate(self, dest: int, payload_len: int, now: int):
        return self.routing.originate(dest, payload_len, now)

    def dump_neighbors(self, now: int):
        """--dump-neighbors：写出邻居表和路由集合"""
        if self.trace is None:
            return
        self.trace.emit(
            now,
            self.node_id,
            TraceKind.NEIGHBORS,
            edc=self.table.own_edc.to_json(),
            fwd_set=list(self.table.forwarder_set),
            neighbors=self.neighbors.dump(),
            routing_set=self.routing_set.dump() if self.routing_set is not None else [],
        )

    def finalize(self, now: int) -> Dict[str, Any]:
        """运行结束：返回 node_final 记录字段"""
        mac = self.mac.get_metrics()
        return {
            "mac": mac,
            "routing": self.routing.get_metrics(),
            "discovery": self.discovery.get_metrics(),
            "table": self.table.get_metrics(),
            "signals": self.signal_bus.get_metrics(),
            "neighbor_windows": self.neighbors.windows,
            "missed_windows": self.neighbors.missed_windows,
            "neighbors": len(self.neighbors),
            "edc": self.table.own_edc.to_json(),
            "errors": sum(layer.get_status()["errors"] for layer in self.layers),
        }
