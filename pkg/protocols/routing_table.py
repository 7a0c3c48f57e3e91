"""
路由表（网络层侧）
EDC 进展度量、贪心转发者集合选择，以及 IForwardingJudge 的接受判定
"""

from collections import OrderedDict
from itertools import combinations
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import UnsupportedDestinationError
from models.packet import NO_ROUTE, Edc, ForwarderCriteria, MetricKind
from models.trace import TraceKind
from protocols.neighbor_table import NeighborTable
from protocols.routing_set import RoutingSet, RoutingSetTable
from utils.logger import NodeLogger

# (peer, advertised_edc, p_link)
Candidate = Tuple[int, float, float]

ORACLE_TOLERANCE = 1e-9

# 记住最近接受过的分组，用于拒绝重复；最旧的先淘汰
SEEN_PACKETS_LIMIT = 256


def _edc_of(p_sum: float, pe_sum: float, w: float) -> float:
    """EDC(F) = w + 1/Σp + Σ(p·edc)/Σp"""
    return w + 1.0 / p_sum + pe_sum / p_sum


def _usable(neighbors: Iterable[Candidate]) -> List[Candidate]:
    """去掉 p=0 和无路由的邻居，按 (edc, peer) 升序"""
    usable = [
        (peer, float(edc), float(p))
        for peer, edc, p in neighbors
        if edc is not None and p > 0.0 and np.isfinite(edc)
    ]
    usable.sort(key=lambda c: (c[1], c[0]))
    return usable


def compute_edc(neighbors: Iterable[Candidate], w: float) -> Tuple[Edc, List[int]]:
    """贪心前缀：按EDC升序逐个加入，EDC严格下降时继续增长"""
    usable = _usable(neighbors)
    if not usable:
        return NO_ROUTE, []
    best = None
    chosen: List[int] = []
    p_sum = 0.0
    pe_sum = 0.0
    for peer, edc, p in usable:
        value = _edc_of(p_sum + p, pe_sum + p * edc, w)
        if best is not None and value >= best:
            break
        p_sum += p
        pe_sum += p * edc
        best = value
        chosen.append(peer)
    return Edc.of(best), chosen


def prefix_minimum(neighbors: Iterable[Candidate], w: float) -> float:
    """所有前缀的EDC最小值（无可用邻居为 inf）"""
    usable = _usable(neighbors)
    if not usable:
        return float("inf")
    edc = np.array([c[1] for c in usable])
    p = np.array([c[2] for c in usable])
    p_sum = np.cumsum(p)
    pe_sum = np.cumsum(p * edc)
    return float(np.min(w + 1.0 / p_sum + pe_sum / p_sum))


def subset_minimum(neighbors: Iterable[Candidate], w: float) -> float:
    """所有非空子集的EDC最小值，只用于诊断"""
    usable = _usable(neighbors)
    best = float("inf")
    for size in range(1, len(usable) + 1):
        for subset in combinations(usable, size):
            p_sum = sum(c[2] for c in subset)
            pe_sum = sum(c[2] * c[1] for c in subset)
            best = min(best, _edc_of(p_sum, pe_sum, w))
    return best


def edc_oracle(neighbors: Sequence[Candidate], w: float) -> Tuple[float, float]:
    """诊断用：返回 (前缀穷举最小值, 子集穷举最小值)"""
    return prefix_minimum(neighbors, w), subset_minimum(neighbors, w)


class RoutingTable:
    """路由表：维护本节点EDC和转发者集合，回答MAC的接受查询"""

    def __init__(
        self,
        node_id: int,
        sink_id: int,
        neighbors: NeighborTable,
        w: float = 0.1,
        margin: float = 0.5,
        routing_set: Optional[RoutingSetTable] = None,
        downward_progress: bool = False,
        verify_edc: bool = False,
        trace=None,
    ):
        self.node_id = node_id
        self.sink_id = sink_id
        self.neighbors = neighbors
        self.w = w
        self.margin = margin
        self.routing_set = routing_set
        self.downward_progress = downward_progress
        self.verify_edc = verify_edc
        self.trace = trace

        self.own_edc: Edc = Edc.of(0.0) if self.is_sink else NO_ROUTE
        self.forwarder_set: List[int] = []
        self._accepted: "OrderedDict[Tuple[int, int], None]" = OrderedDict()
        self._edc_listeners: List[Callable[[Edc, Edc, int], None]] = []
        self._set_listeners: List[Callable[[List[int], int], None]] = []
        self._logger = NodeLogger(node_id, "routing")

        self._metrics = {
            "recomputes": 0,
            "edc_changes": 0,
            "accepted": 0,
            "rejected": 0,
            "released": 0,
            "oracle_mismatches": 0,
        }

        neighbors.own_metric = lambda: self.own_edc
        neighbors.add_change_listener(lambda now: self.recompute(now))
        if routing_set is not None:
            routing_set.via_valid = self._below_neighbor

    def _below_neighbor(self, peer: int, now: int) -> bool:
        """peer 通告的EDC是否仍高于本节点；EDC次序翻转后经它学到的条目失效"""
        status = self.neighbors.neighbor_status(peer, now)
        peer_edc = status.advertised_edc if status is not None else None
        return peer_edc is not None and peer_edc > self.own_edc

    @property
    def is_sink(self) -> bool:
        return self.node_id == self.sink_id

    def add_edc_listener(self, listener: Callable[[Edc, Edc, int], None]):
        """EDC变化回调 (旧值, 新值, 时刻)"""
        self._edc_listeners.append(listener)

    def add_set_listener(self, listener: Callable[[List[int], int], None]):
        """路由集合新增地址回调"""
        self._set_listeners.append(listener)

    def recompute(self, now: int) -> bool:
        """由邻居状态重新计算EDC；返回是否变化"""
        if self.is_sink:
            return False
        self._metrics["recomputes"] += 1
        candidates = self.neighbors.routing_candidates(now)
        edc, fwd_set = compute_edc(candidates, self.w)

        if self.verify_edc and candidates:
            prefix_best, subset_best = edc_oracle(candidates, self.w)
            value = edc.value if edc.is_finite else float("inf")
            if abs(value - prefix_best) > ORACLE_TOLERANCE or abs(value - subset_best) > ORACLE_TOLERANCE:
                self._metrics["oracle_mismatches"] += 1
                self._logger.warning(
                    f"EDC与穷举结果不一致: greedy={value} prefix={prefix_best} subset={subset_best}", now
                )

        if edc == self.own_edc and fwd_set == self.forwarder_set:
            return False
        old = self.own_edc
        self.own_edc = edc
        self.forwarder_set = fwd_set
        if self.trace is not None:
            self.trace.emit(now, self.node_id, TraceKind.EDC_UPDATE, edc=edc.to_json(), fwd_set=list(fwd_set))
        if edc != old:
            self._metrics["edc_changes"] += 1
            for listener in self._edc_listeners:
                listener(old, edc, now)
        return True

    def calculate_upwards_cost(self, dest: int) -> Edc:
        """给外发分组打标签用的上行代价"""
        if dest != self.sink_id:
            raise UnsupportedDestinationError(
                f"上行代价只对汇聚节点 {self.sink_id} 有定义，收到 {dest}",
                details={"dest": dest, "sink": self.sink_id},
            )
        return self.own_edc

    def on_routing_overheard(
        self, peer: int, edc: Optional[Edc], routing_set: Optional[RoutingSet], now: int
    ) -> List[int]:
        """侦听到对端的路由内容，返回路由集合新增的地址"""
        if edc is not None and self.neighbors.update_advertised(peer, edc, now):
            self.recompute(now)

        if routing_set is None or self.routing_set is None:
            return []
        # 只有EDC更高的邻居的集合描述下行可达性
        if not self._below_neighbor(peer, now):
            return []
        added = self.routing_set.merge(routing_set, peer, now)
        if added:
            for listener in self._set_listeners:
                listener(added, now)
        return added

    def judge(self, criteria: ForwarderCriteria, now: int, sender: Optional[int] = None) -> bool:
        """IForwardingJudge：竞争前的接受判定"""
        if criteria.metric == MetricKind.UPWARD_EDC:
            verdict = self.judge_upward(criteria)
        else:
            verdict = self.judge_downward(criteria, now, sender)
        if verdict:
            self._remember(criteria.packet_id)
            self._metrics["accepted"] += 1
        else:
            self._metrics["rejected"] += 1
        if self.trace is not None:
            self.trace.emit(
                now,
                self.node_id,
                TraceKind.JUDGE,
                verdict="accept" if verdict else "reject",
                metric=criteria.metric.value,
                origin=criteria.origin,
                pseq=criteria.packet_seq,
                sender_edc=None if criteria.sender_edc is None else criteria.sender_edc.to_json(),
                own_edc=self.own_edc.to_json(),
            )
        return verdict

    def _remember(self, packet_id: Tuple[int, int]):
        self._accepted[packet_id] = None
        self._accepted.move_to_end(packet_id)
        while len(self._accepted) > SEEN_PACKETS_LIMIT:
            self._accepted.popitem(last=False)

    @property
    def seen_count(self) -> int:
        return len(self._accepted)

    def _already_seen(self, criteria: ForwarderCriteria) -> bool:
        return criteria.origin == self.node_id or criteria.packet_id in self._accepted

    def judge_upward(self, criteria: ForwarderCriteria) -> bool:
        """own + margin <= sender_edc 且 own 有限；重复分组拒绝"""
        if self._already_seen(criteria):
            return False
        if criteria.final_dest is not None and criteria.final_dest == self.node_id:
            return True
        if not self.own_edc.is_finite:
            return False
        return self.own_edc.plus(self.margin) <= criteria.sender_edc

    def judge_downward(self, criteria: ForwarderCriteria, now: int, sender: Optional[int] = None) -> bool:
        """目的是自己，或目的在新鲜的路由集合条目中；重复分组拒绝"""
        if self._already_seen(criteria):
            return False
        if criteria.final_dest == self.node_id:
            return True
        if self.routing_set is None or not self.routing_set.contains(criteria.final_dest, now):
            return False
        if self.downward_progress:
            status = self.neighbors.neighbor_status(sender, now) if sender is not None else None
            sender_edc = status.advertised_edc if status is not None else None
            if sender_edc is None or not (self.own_edc > sender_edc):
                return False
        return True

    def release(self, criteria: ForwarderCriteria) -> None:
        """MAC竞争失败后撤销接受记录"""
        if criteria.packet_id in self._accepted:
            del self._accepted[criteria.packet_id]
            self._metrics["released"] += 1

    def holds(self, dest: int, now: int) -> bool:
        """dest 是否可经本节点向下到达"""
        return self.routing_set is not None and self.routing_set.contains(dest, now)

    def reset(self, now: int):
        """断电且不保留路由状态时清空"""
        self._accepted.clear()
        if self.routing_set is not None:
            self.routing_set.reset()
        if not self.is_sink:
            old = self.own_edc
            self.own_edc = NO_ROUTE
            self.forwarder_set = []
            if old != NO_ROUTE and self.trace is not None:
                self.trace.emit(now, self.node_id, TraceKind.EDC_UPDATE, edc=None, fwd_set=[])

    def get_metrics(self):
        return dict(self._metrics)
