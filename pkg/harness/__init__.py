"""
运行框架模块
场景加载、拓扑、流量、单次运行、指标、不变量检查和异步多种子运行器
"""

from harness.metrics import summarize_trace
from harness.runner import execute_run, execute_seeds
from harness.scenario_loader import load_scenario, parse_scenario
from harness.simulation import RunResult, Simulation, run_scenario

__all__ = [
    "load_scenario",
    "parse_scenario",
    "Simulation",
    "RunResult",
    "run_scenario",
    "summarize_trace",
    "execute_run",
    "execute_seeds",
]
