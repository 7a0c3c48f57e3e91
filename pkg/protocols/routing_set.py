"""
下行路由集合
记录经由本节点可以向下到达的地址，每个条目记住最近的来源邻居和刷新时间
"""

from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Tuple


@dataclass(frozen=True, slots=True)
class RoutingSet:
    """一次共享的路由集合"""
    entries: FrozenSet[int]
    version: int = 0

    @classmethod
    def of(cls, entries: Iterable[int], version: int = 0) -> "RoutingSet":
        return cls(frozenset(entries), version)

    def __contains__(self, addr: int) -> bool:
        return addr in self.entries

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(slots=True)
class SetEntry:
    addr: int
    via: int
    refreshed_at: int


class RoutingSetTable:
    """本节点的下行路由集合"""

    def __init__(self, node_id: int, set_ttl_us: int, max_set_size: int = 64):
        self.node_id = node_id
        self.set_ttl_us = set_ttl_us
        self.max_set_size = max_set_size
        self.version = 0
        self._entries: Dict[int, SetEntry] = {}
        # (via, now) -> 来源邻居是否仍在本节点之下，由路由表接线
        self.via_valid: Callable[[int, int], bool] = lambda via, now: True

    def _live(self, entry: SetEntry, now: int) -> bool:
        return now - entry.refreshed_at <= self.set_ttl_us and self.via_valid(entry.via, now)

    def __len__(self) -> int:
        return len(self._entries)

    def merge(self, routing_set: RoutingSet, via: int, now: int) -> List[int]:
        """合并从 via 侦听到的集合：own ← own ∪ set ∪ {via}，返回新增地址"""
        added = []
        for addr in sorted(set(routing_set.entries) | {via}):
            if addr == self.node_id:
                continue
            entry = self._entries.get(addr)
            if entry is None:
                self._entries[addr] = SetEntry(addr, via, now)
                added.append(addr)
            else:
                entry.via = via
                entry.refreshed_at = now
        if added:
            self.version += 1
        return added

    def expire(self, now: int) -> List[int]:
        """删除超过 set_ttl 未刷新的条目"""
        dead = [a for a, e in self._entries.items() if now - e.refreshed_at > self.set_ttl_us]
        for addr in dead:
            del self._entries[addr]
        if dead:
            self.version += 1
        return sorted(dead)

    def contains(self, addr: int, now: int) -> bool:
        """addr 是否在有效条目中：未过期，且来源邻居的EDC仍高于本节点"""
        entry = self._entries.get(addr)
        return entry is not None and self._live(entry, now)

    def via(self, addr: int) -> Optional[int]:
        entry = self._entries.get(addr)
        return entry.via if entry is not None else None

    def fresh_entries(self, now: int) -> List[SetEntry]:
        return [e for e in self._entries.values() if self._live(e, now)]

    def advertised(self, now: int) -> Tuple[RoutingSet, bool]:
        """待共享的集合（包含自身）；超过上限时保留最近刷新的条目，返回 (集合, 是否截断)"""
        fresh = self.fresh_entries(now)
        limit = self.max_set_size - 1
        truncated = len(fresh) > limit
        if truncated:
            fresh.sort(key=lambda e: (-e.refreshed_at, e.addr))
            fresh = fresh[:limit]
        entries = {e.addr for e in fresh}
        entries.add(self.node_id)
        return RoutingSet(frozenset(entries), self.version & 0xFFFF), truncated

    def reset(self):
        if self._entries:
            self.version += 1
        self._entries.clear()

    def dump(self) -> List[Dict[str, int]]:
        return [
            {"addr": e.addr, "via": e.via, "refreshed_at": e.refreshed_at}
            for e in sorted(self._entries.values(), key=lambda e: e.addr)
        ]
