"""
协议层基类
节点上的各层（MAC、邻居表、路由、发现）都继承自此类，
统一处理上电/断电和状态统计
"""

from abc import ABC
from typing import Any, Dict

from core.engine import PRIO_TIMER, Event, SimEngine
from utils.logger import NodeLogger


class ProtocolLayer(ABC):
    """协议层基类"""

    layer_name = "layer"

    def __init__(self, node_id: int, engine: SimEngine, trace=None):
        self.node_id = node_id
        self.engine = engine
        self.trace = trace

        # 节点定时器的目标，断电时由引擎整体取消
        self.timer_target = ("node", node_id)

        self.is_powered = False

        self.logger = NodeLogger(node_id, self.layer_name)

        # 层状态
        self._status: Dict[str, Any] = {
            "node_id": node_id,
            "layer": self.layer_name,
            "status": "initialized",
            "power_cycles": 0,
            "errors": 0,
            "last_error": None,
        }

    def power_on(self, now: int):
        """节点上电"""
        self.is_powered = True
        self._status["status"] = "running"
        self._status["power_cycles"] += 1
        self.on_power_on(now)

    def power_off(self, now: int):
        """节点断电"""
        if not self.is_powered:
            return
        self.is_powered = False
        self._status["status"] = "off"
        self.on_power_off(now)

    def on_power_on(self, now: int):
        """子类上电钩子"""
        pass

    def on_power_off(self, now: int):
        """子类断电钩子"""
        pass

    def schedule_timer(self, at: int, action, kind: str) -> Event:
        """调度本节点定时器"""
        return self.engine.schedule(at, action, priority=PRIO_TIMER, target=self.timer_target, kind=kind)

    def record_error(self, error: Exception):
        self._status["errors"] += 1
        self._status["last_error"] = str(error)

    def get_status(self) -> Dict[str, Any]:
        """获取层状态"""
        return dict(self._status)
