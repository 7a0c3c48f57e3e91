"""
系统配置管理
进程级配置：日志、输出目录、并行运行参数
仿真参数全部来自场景文件，这里的配置不影响仿真结果
"""

import os
from dataclasses import dataclass, field
from typing import Optional

from dotenv import load_dotenv

# 加载环境变量
load_dotenv()


@dataclass
class LoggingConfig:
    """诊断日志配置"""
    level: str = "WARNING"
    log_file: Optional[str] = None
    rotation: str = "10 MB"
    retention: str = "7 days"
    enable_json: bool = False


@dataclass
class OutputConfig:
    """输出配置"""
    base_path: str = "./output"
    trace_name: str = "trace.jsonl"
    summary_name: str = "summary.json"
    write_csv: bool = True


@dataclass
class RunnerConfig:
    """多种子运行配置"""
    workers: int = 4  # 并行进程数
    # 单个种子时直接在线程中运行，避免进程池开销
    inline_single_run: bool = True


@dataclass
class SystemConfig:
    """系统总配置"""
    logging: LoggingConfig = field(default_factory=LoggingConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    runner: RunnerConfig = field(default_factory=RunnerConfig)

    @classmethod
    def from_env(cls) -> "SystemConfig":
        """从环境变量加载配置"""
        config = cls()

        # 加载日志配置
        config.logging.level = os.getenv("OPPNET_LOG", "WARNING").upper()
        config.logging.log_file = os.getenv("OPPNET_LOG_FILE") or None
        config.logging.enable_json = os.getenv("OPPNET_LOG_JSON", "false").lower() == "true"

        # 加载输出配置
        config.output.base_path = os.getenv("OPPNET_OUT", "./output")
        config.output.write_csv = os.getenv("OPPNET_CSV", "true").lower() == "true"

        # 加载运行配置
        config.runner.workers = max(1, int(os.getenv("OPPNET_WORKERS", "4")))

        return config


# 全局配置实例
config = SystemConfig.from_env()
