"""
按 (节点, 用途) 划分的随机数流
同一 (seed, 节点, 用途, 抽取序列) 在任何平台上得到相同的值
"""

import zlib
from typing import Dict, Sequence, Tuple

import numpy as np

# 非节点实体（信道、拓扑生成器）使用的节点号
GLOBAL_STREAM = -1


class RngStream:
    """单个确定性随机数流，底层是 numpy PCG64"""

    def __init__(self, seed: int, node: int, purpose: str):
        self.seed = seed
        self.stream_id: Tuple[int, str] = (node, purpose)
        entropy = [int(seed), int(node) + 1, zlib.crc32(purpose.encode("utf-8"))]
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    def random(self) -> float:
        """[0, 1) 均匀分布"""
        return float(self._gen.random())

    def uniform(self, low: float, high: float) -> float:
        return float(self._gen.uniform(low, high))

    def integers(self, low: int, high: int) -> int:
        """[low, high) 上的整数"""
        return int(self._gen.integers(low, high))

    def exponential(self, scale: float) -> float:
        return float(self._gen.exponential(scale))

    def bernoulli(self, p: float) -> bool:
        if p <= 0.0:
            return False
        if p >= 1.0:
            return True
        return self.random() < p

    def choice(self, items: Sequence):
        return items[self.integers(0, len(items))]


class RngStreams:
    """随机数流工厂，同一 (节点, 用途) 总是返回同一个流"""

    def __init__(self, seed: int):
        self.seed = seed
        self._streams: Dict[Tuple[int, str], RngStream] = {}

    def stream(self, node: int, purpose: str) -> RngStream:
        key = (node, purpose)
        stream = self._streams.get(key)
        if stream is None:
            stream = RngStream(self.seed, node, purpose)
            self._streams[key] = stream
        return stream
