"""
场景加载
JSON文件 → 严格校验的 Scenario；校验失败统一转换为 ScenarioError（指明字段和规则）
"""

import json
from pathlib import Path
from typing import Any, Dict, Union

from pydantic import ValidationError

from core.errors import ScenarioError
from models.scenario import Scenario
from utils.logger import get_logger

logger = get_logger("scenario")


def _first_error(error: ValidationError) -> ScenarioError:
    detail = error.errors()[0]
    field_name = ".".join(str(part) for part in detail.get("loc", ()))
    rule = detail.get("type", "")
    message = detail.get("msg", str(error))
    return ScenarioError(
        f"场景校验失败: {field_name or '<root>'}: {message}",
        field_name=field_name,
        rule=f"{rule}: {message}",
    )


def parse_scenario(data: Dict[str, Any]) -> Scenario:
    """校验已解析的场景字典"""
    try:
        return Scenario.model_validate(data)
    except ValidationError as e:
        raise _first_error(e) from e


def resolve_paths(scenario: Scenario, base_dir: Path) -> Scenario:
    """采集曲线路径相对场景文件所在目录解析"""
    updates = {}
    energy = scenario.energy
    if energy.harvest_trace and not Path(energy.harvest_trace).is_absolute():
        updates["energy"] = energy.model_copy(update={"harvest_trace": str(base_dir / energy.harvest_trace)})
    nodes = {}
    for node_id, override in scenario.nodes.items():
        if override.harvest_trace and not Path(override.harvest_trace).is_absolute():
            override = override.model_copy(update={"harvest_trace": str(base_dir / override.harvest_trace)})
        nodes[node_id] = override
    if nodes != scenario.nodes:
        updates["nodes"] = nodes
    return scenario.model_copy(update=updates) if updates else scenario


def load_scenario(path: Union[str, Path]) -> Scenario:
    """加载并校验场景文件"""
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"场景文件不存在: {path}", field_name="<file>", rule="file must exist")
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"场景文件不是合法JSON: {e}", field_name="<file>", rule="valid JSON") from e
    if not isinstance(data, dict):
        raise ScenarioError("场景文件顶层必须是对象", field_name="<root>", rule="JSON object")
    scenario = resolve_paths(parse_scenario(data), path.parent)
    logger.debug(f"已加载场景 {scenario.name}，{len(scenario.node_ids())} 个节点")
    return scenario


def with_seed(scenario: Scenario, seed: int) -> Scenario:
    """覆盖种子"""
    if seed == scenario.seed:
        return scenario
    return scenario.model_copy(update={"seed": seed})


def effective_parameters(scenario: Scenario) -> Dict[str, Any]:
    """物化全部默认值后的场景，写入追踪头"""
    return scenario.model_dump(mode="json")
