"""
OppNet 仿真器主程序入口
间歇供电传感网机会路由离散事件仿真

用法:
    python main.py run --scenario F [--seed N | --seeds N..M] [--out DIR] [--dump-neighbors]
    python main.py summarize --trace F [--out DIR]
    python main.py validate --scenario F
"""

import argparse
import asyncio
import json
import sys
from typing import List, Optional

from config import config
from core.errors import InvariantViolation, OppNetError, ScenarioError
from harness.runner import execute_run, execute_seeds, parse_seed_range, summarize_to
from harness.scenario_loader import effective_parameters, load_scenario
from utils.logger import get_logger, setup_logger

# 退出码
EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_SCENARIO = 2

logger = get_logger("main")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oppnet", description="间歇供电传感网机会路由仿真器")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="运行场景")
    run.add_argument("--scenario", required=True, help="场景JSON文件")
    seeds = run.add_mutually_exclusive_group()
    seeds.add_argument("--seed", type=int, default=None, help="覆盖场景种子")
    seeds.add_argument("--seeds", default=None, help="种子范围 N..M，每个种子一个子目录")
    run.add_argument("--out", default=None, help="输出目录")
    run.add_argument("--dump-neighbors", action="store_true", help="运行结束时写出邻居表")
    run.add_argument("--no-csv", action="store_true", help="不写CSV导出")

    summarize = sub.add_parser("summarize", help="由追踪文件重算汇总")
    summarize.add_argument("--trace", required=True, help="追踪JSONL文件")
    summarize.add_argument("--out", default=None, help="输出目录（缺省为追踪所在目录）")

    validate = sub.add_parser("validate", help="只校验场景文件")
    validate.add_argument("--scenario", required=True, help="场景JSON文件")
    return parser


async def _run(args) -> None:
    scenario = load_scenario(args.scenario)
    write_csv = False if args.no_csv else None
    if args.seeds:
        try:
            seed_list = parse_seed_range(args.seeds)
        except ValueError as e:
            raise ScenarioError(str(e), field_name="--seeds", rule="N..M") from e
        reports = await execute_seeds(scenario, seed_list, args.out, args.dump_neighbors, write_csv)
    else:
        reports = [await execute_run(scenario, args.seed, args.out, args.dump_neighbors, write_csv)]
    for report in reports:
        summary = report.summary
        ratios = ", ".join(f"{key}={flow.delivery_ratio:.3f}" for key, flow in summary.flows.items())
        print(f"seed={report.seed} delivered={summary.total_delivered} {ratios} trace={report.trace_path}")


async def _summarize(args) -> None:
    summary = await summarize_to(args.trace, args.out)
    print(json.dumps(summary.model_dump(mode="json"), indent=2, ensure_ascii=False))


def _validate(args) -> None:
    scenario = load_scenario(args.scenario)
    print(json.dumps(effective_parameters(scenario), indent=2, ensure_ascii=False))


def main(argv: Optional[List[str]] = None) -> int:
    """主函数，返回退出码"""
    args = build_parser().parse_args(argv)
    setup_logger(config.logging)
    try:
        if args.command == "run":
            asyncio.run(_run(args))
        elif args.command == "summarize":
            asyncio.run(_summarize(args))
        else:
            _validate(args)
    except ScenarioError as e:
        logger.error(f"场景错误: {e.error_message} (字段: {e.field_name}, 规则: {e.rule})")
        print(f"scenario error: {e.field_name}: {e.rule}", file=sys.stderr)
        return EXIT_SCENARIO
    except InvariantViolation as e:
        logger.error(f"不变量检查失败: {e.assertion}")
        print(f"invariant violated: {e.assertion}", file=sys.stderr)
        return EXIT_INVARIANT
    except OppNetError as e:
        logger.error(f"运行失败: {e}")
        print(str(e), file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
