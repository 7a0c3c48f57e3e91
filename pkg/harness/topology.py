"""
拓扑生成器：显式坐标、直线、网格、随机
"""

from typing import Dict, Tuple

from core.channel import Topology
from core.errors import ScenarioError
from models.scenario import Scenario, TopologyKind, TopologySpec
from utils.rng import GLOBAL_STREAM, RngStreams

# 随机拓扑重抽上限
MAX_RANDOM_DRAWS = 100

Positions = Dict[int, Tuple[float, float]]


def line_positions(n: int, spacing: float) -> Positions:
    return {i: (i * spacing, 0.0) for i in range(n)}


def grid_positions(rows: int, cols: int, spacing: float) -> Positions:
    """节点号按行优先编号，0 在左下角"""
    return {r * cols + c: (c * spacing, r * spacing) for r in range(rows) for c in range(cols)}


def random_positions(n: int, area: float, comm_range: float, streams: RngStreams) -> Positions:
    """方形区域内均匀撒点，重抽直到连通"""
    rng = streams.stream(GLOBAL_STREAM, "topology")
    for _ in range(MAX_RANDOM_DRAWS):
        positions = {i: (rng.uniform(0.0, area), rng.uniform(0.0, area)) for i in range(n)}
        if Topology(positions, comm_range).is_connected():
            return positions
    raise ScenarioError(
        f"{MAX_RANDOM_DRAWS} 次随机撒点都不连通，请增大通信半径或缩小区域",
        field_name="topology.area_m",
        rule="random topology must be connected",
    )


def build_positions(spec: TopologySpec, comm_range: float, streams: RngStreams) -> Positions:
    if spec.kind == TopologyKind.EXPLICIT:
        return {int(k): (float(v[0]), float(v[1])) for k, v in spec.positions.items()}
    if spec.kind == TopologyKind.LINE:
        return line_positions(spec.n, spec.spacing_m)
    if spec.kind == TopologyKind.GRID:
        return grid_positions(spec.rows, spec.cols, spec.spacing_m)
    return random_positions(spec.n, spec.area_m, comm_range, streams)


def build_topology(scenario: Scenario, streams: RngStreams) -> Topology:
    """由场景构造拓扑"""
    comm_range = scenario.channel.comm_range_m
    return Topology(build_positions(scenario.topology, comm_range, streams), comm_range)
