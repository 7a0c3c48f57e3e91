"""
输出管理器
负责把运行结果写到输出目录：汇总JSON、能量曲线CSV、路径CSV
"""

import asyncio
import csv
import io
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import aiofiles
import aiofiles.os

from models.metrics import MetricsSummary
from utils.logger import get_logger

logger = get_logger("output")


def _csv_text(header: List[str], rows) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _safe_name(name: str) -> str:
    return name.replace("->", "_to_").replace("/", "_")


class OutputManager:
    """输出管理器，一次运行（一个种子）一个目录"""

    def __init__(self, base_path: Union[str, Path] = "./output", summary_name: str = "summary.json"):
        self.base_path = Path(base_path)
        self.summary_name = summary_name
        self._written: List[str] = []

    @property
    def written(self) -> List[str]:
        return list(self._written)

    def run_dir(self, seed: Optional[int] = None) -> Path:
        """多种子运行时每个种子一个子目录"""
        return self.base_path if seed is None else self.base_path / f"seed_{seed}"

    async def initialize(self, seed: Optional[int] = None) -> Path:
        path = self.run_dir(seed)
        await self._ensure_directory(path)
        return path

    async def _ensure_directory(self, path: Path):
        """确保目录存在"""
        if not await aiofiles.os.path.exists(path):
            await asyncio.to_thread(os.makedirs, path, exist_ok=True)

    async def _write_text(self, filepath: Path, content: str) -> str:
        async with aiofiles.open(filepath, "w", encoding="utf-8", newline="") as f:
            await f.write(content)
        self._written.append(str(filepath))
        return str(filepath)

    async def save_summary(self, summary: MetricsSummary, seed: Optional[int] = None) -> str:
        """写出汇总JSON"""
        directory = await self.initialize(seed)
        content = json.dumps(summary.model_dump(mode="json"), indent=2, ensure_ascii=False)
        return await self._write_text(directory / self.summary_name, content)

    async def save_energy_csv(self, node_id: int, samples, seed: Optional[int] = None) -> str:
        """energy_<node>.csv：time_s,level_mj"""
        directory = await self.initialize(seed)
        rows = [(f"{t:.6f}", repr(level)) for t, level in samples]
        return await self._write_text(directory / f"energy_{node_id}.csv", _csv_text(["time_s", "level_mj"], rows))

    async def save_routes_csv(self, flow: str, routes, seed: Optional[int] = None) -> str:
        """routes_<flow>.csv：packet_seq,route"""
        directory = await self.initialize(seed)
        filepath = directory / f"routes_{_safe_name(flow)}.csv"
        return await self._write_text(filepath, _csv_text(["packet_seq", "route"], routes))

    async def save_exports(self, exports, seed: Optional[int] = None) -> List[str]:
        """写出全部CSV导出"""
        paths = []
        for node_id in sorted(exports.energy):
            paths.append(await self.save_energy_csv(node_id, exports.energy[node_id], seed))
        for flow in sorted(exports.routes):
            paths.append(await self.save_routes_csv(flow, exports.routes[flow], seed))
        logger.debug(f"已写出 {len(paths)} 个CSV文件")
        return paths

    async def save_json(self, name: str, data: Dict[str, Any], seed: Optional[int] = None) -> str:
        directory = await self.initialize(seed)
        return await self._write_text(directory / name, json.dumps(data, indent=2, ensure_ascii=False, default=str))

    async def load_summary(self, seed: Optional[int] = None) -> Optional[MetricsSummary]:
        """读回汇总"""
        filepath = self.run_dir(seed) / self.summary_name
        if not await aiofiles.os.path.exists(filepath):
            return None
        async with aiofiles.open(filepath, "r", encoding="utf-8") as f:
            content = await f.read()
        return MetricsSummary.model_validate_json(content)
