"""
节点内信号总线
负责把MAC发出的相遇信号同步分发给同一节点上注册的监听者
"""

from typing import Callable, Dict, List

from models.signals import EncounterKind, EncounterSignal

SignalListener = Callable[[EncounterSignal], None]


class SignalBus:
    """同步信号总线，按注册顺序调用监听者"""

    def __init__(self, node_id: int):
        self.node_id = node_id
        self._subscribers: List[SignalListener] = []

        # 统计
        self._metrics = {kind: 0 for kind in EncounterKind}

    def subscribe_all(self, callback: SignalListener):
        """订阅全部信号"""
        if callback not in self._subscribers:
            self._subscribers.append(callback)

    def publish(self, signal: EncounterSignal):
        """发布信号"""
        self._metrics[signal.kind] += 1
        for callback in self._subscribers:
            callback(signal)

    def get_metrics(self) -> Dict[str, int]:
        """获取各类信号计数"""
        return {kind.value: count for kind, count in self._metrics.items()}
