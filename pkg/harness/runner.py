"""
异步运行器
单个或多个种子的仿真在进程池中运行（仿真本身是同步的），结果通过 OutputManager 写出
"""

import asyncio
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from config.config import config
from core.errors import InvariantViolation
from harness.metrics import TraceExports, summarize_trace
from harness.scenario_loader import with_seed
from harness.simulation import run_scenario
from models.metrics import MetricsSummary
from models.scenario import Scenario
from utils.logger import get_logger, setup_logger
from utils.output_manager import OutputManager

logger = get_logger("runner")


@dataclass
class RunReport:
    """一个种子的运行报告"""
    seed: int
    summary: MetricsSummary
    trace_path: str
    files: List[str] = field(default_factory=list)
    wall_ms: int = 0


def _run_worker(scenario: Scenario, seed: int, trace_path: str, dump_neighbors: bool) -> Tuple[MetricsSummary, TraceExports, int]:
    """进程池工作函数：运行并由追踪重算汇总（复式记账）"""
    result = run_scenario(scenario, seed=seed, trace_path=trace_path, dump_neighbors=dump_neighbors)
    recomputed, exports = summarize_trace(trace_path)
    if recomputed != result.summary:
        raise InvariantViolation(
            "运行时汇总与追踪重算不一致",
            details={"seed": seed, "trace": trace_path},
        )
    return result.summary, exports, result.wall_ms


def parse_seed_range(text: str) -> List[int]:
    """'N..M' → [N, ..., M]"""
    if ".." not in text:
        return [int(text)]
    low, high = text.split("..", 1)
    low_i, high_i = int(low), int(high)
    if high_i < low_i:
        raise ValueError(f"种子范围无效: {text}")
    return list(range(low_i, high_i + 1))


async def execute_run(
    scenario: Scenario,
    seed: Optional[int] = None,
    out_dir: Optional[Union[str, Path]] = None,
    dump_neighbors: bool = False,
    write_csv: Optional[bool] = None,
    executor: Optional[Executor] = None,
    per_seed_dir: bool = False,
) -> RunReport:
    """运行一个种子并写出追踪、汇总和CSV"""
    seed = scenario.seed if seed is None else seed
    write_csv = config.output.write_csv if write_csv is None else write_csv
    output = OutputManager(out_dir or config.output.base_path, config.output.summary_name)
    directory = await output.initialize(seed if per_seed_dir else None)
    trace_path = str(directory / config.output.trace_name)

    loop = asyncio.get_running_loop()
    summary, exports, wall_ms = await loop.run_in_executor(
        executor, _run_worker, with_seed(scenario, seed), seed, trace_path, dump_neighbors
    )

    dir_seed = seed if per_seed_dir else None
    files = [trace_path, await output.save_summary(summary, dir_seed)]
    if write_csv:
        files.extend(await output.save_exports(exports, dir_seed))
    logger.info(f"种子 {seed} 完成，输出目录 {directory}")
    return RunReport(seed=seed, summary=summary, trace_path=trace_path, files=files, wall_ms=wall_ms)


async def execute_seeds(
    scenario: Scenario,
    seeds: Sequence[int],
    out_dir: Optional[Union[str, Path]] = None,
    dump_neighbors: bool = False,
    write_csv: Optional[bool] = None,
    workers: Optional[int] = None,
) -> List[RunReport]:
    """多个种子并行运行，每个种子一个子目录；结果按种子顺序返回"""
    seeds = list(seeds)
    if len(seeds) == 1 and config.runner.inline_single_run:
        return [await execute_run(scenario, seeds[0], out_dir, dump_neighbors, write_csv, per_seed_dir=True)]

    workers = workers or config.runner.workers
    pool_args = dict(max_workers=min(workers, len(seeds)), initializer=setup_logger, initargs=(config.logging,))
    with ProcessPoolExecutor(**pool_args) as pool:
        tasks = [
            execute_run(scenario, seed, out_dir, dump_neighbors, write_csv, executor=pool, per_seed_dir=True)
            for seed in seeds
        ]
        results = await asyncio.gather(*tasks, return_exceptions=True)

    reports = []
    for seed, result in zip(seeds, results):
        if isinstance(result, Exception):
            logger.error(f"种子 {seed} 运行失败: {result}")
            raise result
        reports.append(result)
    return reports


async def summarize_to(trace_path: Union[str, Path], out_dir: Optional[Union[str, Path]] = None) -> MetricsSummary:
    """summarize 子命令：由追踪文件重算并写出"""
    summary, exports = await asyncio.to_thread(summarize_trace, trace_path)
    output = OutputManager(out_dir or Path(trace_path).parent, config.output.summary_name)
    await output.save_summary(summary)
    if config.output.write_csv:
        await output.save_exports(exports)
    return summary
