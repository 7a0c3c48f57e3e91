"""
运行结束时的不变量检查
任何一项失败都说明模拟器本身有错，抛出 InvariantViolation
"""

from typing import Dict, Iterable, List, Tuple

from core.energy import EnergyModel, Transition, fj_to_mj
from core.errors import InvariantViolation

# 能量守恒容差（mJ）
ENERGY_TOLERANCE_MJ = 1e-9


def check_energy_conservation(node_id: int, energy: EnergyModel) -> List[str]:
    """账本重建的能量必须等于当前能量"""
    rebuilt = energy.ledger.reconstruct_level_fj()
    diff = abs(fj_to_mj(rebuilt - energy.store.level_fj))
    if diff > ENERGY_TOLERANCE_MJ:
        return [f"节点 {node_id} 能量不守恒: 账本 {fj_to_mj(rebuilt)} mJ, 实际 {energy.store.level_mj} mJ"]
    return []


def check_hysteresis(node_id: int, energy: EnergyModel) -> List[str]:
    """每个 ON 区间都从 >= e_on 开始"""
    problems = []
    for at, transition, level_fj in energy.transitions:
        if transition == Transition.TO_ON and level_fj < energy.store.e_on_fj:
            problems.append(f"节点 {node_id} 在 t={at} 以 {fj_to_mj(level_fj)} mJ 上电，低于 e_on")
        if transition == Transition.TO_OFF and level_fj >= energy.store.e_off_fj:
            problems.append(f"节点 {node_id} 在 t={at} 以 {fj_to_mj(level_fj)} mJ 断电，不低于 e_off")
    return problems


def check_no_tx_while_off(channel_metrics: Dict[str, int]) -> List[str]:
    if channel_metrics.get("tx_while_off", 0):
        return [f"断电节点尝试发送 {channel_metrics['tx_while_off']} 次"]
    return []


def check_deliveries(deliveries: Iterable[Tuple[int, int, Tuple[int, ...], Tuple[float, ...]]]) -> List[str]:
    """交付检查：接收者就是最终目的；上行标签严格递减（无环）"""
    problems = []
    for recipient, final_dest, route, tags in deliveries:
        if recipient != final_dest:
            problems.append(f"分组交付给 {recipient}，但目的是 {final_dest}")
        for a, b in zip(tags, tags[1:]):
            if not b < a:
                problems.append(f"路径 {list(route)} 的上行EDC标签不严格递减: {list(tags)}")
                break
    return problems


def check_run(nodes: Dict[int, object], channel_metrics: Dict[str, int], deliveries) -> None:
    """汇总全部检查，失败时抛出第一条"""
    problems: List[str] = []
    for node_id in sorted(nodes):
        energy = nodes[node_id].energy
        problems.extend(check_energy_conservation(node_id, energy))
        problems.extend(check_hysteresis(node_id, energy))
    problems.extend(check_no_tx_while_off(channel_metrics))
    problems.extend(check_deliveries(deliveries))
    if problems:
        raise InvariantViolation(problems[0], details={"violations": problems[:20], "count": len(problems)})
