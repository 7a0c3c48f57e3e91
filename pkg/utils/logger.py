"""
日志工具模块
诊断日志走 loguru，与仿真追踪文件相互独立，日志级别不会改变仿真结果
"""

import logging
import sys
from pathlib import Path
from typing import Optional

from loguru import logger

from config.config import LoggingConfig

CONSOLE_FORMAT = (
    "<green>{time:HH:mm:ss.SSS}</green> | "
    "<level>{level: <8}</level> | "
    "<cyan>{extra[component]}</cyan> | "
    "<level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {extra[component]} | {message}"

# 拦截到 loguru 的标准库日志
STDLIB_LOGGERS = ("asyncio", "concurrent.futures")


class InterceptHandler(logging.Handler):
    """标准库日志转发到loguru"""

    def emit(self, record: logging.LogRecord) -> None:
        try:
            level = logger.level(record.levelname).name
        except ValueError:
            level = record.levelno

        frame, depth = logging.currentframe(), 2
        while frame.f_code.co_filename == logging.__file__:
            frame = frame.f_back
            depth += 1

        logger.bind(component=record.name).opt(depth=depth, exception=record.exc_info).log(level, record.getMessage())


def setup_logger(settings: Optional[LoggingConfig] = None, level: Optional[str] = None):
    """
    配置诊断日志

    Args:
        settings: 日志配置，缺省用默认值
        level: 覆盖配置中的级别
    """
    settings = settings or LoggingConfig()
    level = (level or settings.level).upper()

    logger.remove()
    logger.configure(extra={"component": "oppnet"})

    # stdout 留给命令行结果
    logger.add(sys.stderr, format=CONSOLE_FORMAT, level=level, colorize=True, diagnose=False)

    if settings.log_file:
        path = Path(settings.log_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        logger.add(
            str(path),
            format=FILE_FORMAT,
            level=level,
            rotation=settings.rotation,
            retention=settings.retention,
            compression="gz",
            serialize=settings.enable_json,
        )

    handler = InterceptHandler()
    logging.basicConfig(handlers=[handler], level=0, force=True)
    for name in STDLIB_LOGGERS:
        logging.getLogger(name).handlers = [handler]

    logger.bind(component="logger").debug(f"日志级别 {level}")


def get_logger(name: Optional[str] = None):
    """按组件名绑定的 logger"""
    return logger.bind(component=name or "oppnet")


class NodeLogger:
    """节点专用日志记录器，消息带仿真时刻和节点前缀"""

    def __init__(self, node_id: int, layer: str):
        self.node_id = node_id
        self.layer = layer
        self._logger = logger.bind(component=layer, node_id=node_id, layer=layer)

    def _prefix(self, now_us: Optional[int]) -> str:
        if now_us is None:
            return f"[n{self.node_id}/{self.layer}]"
        return f"[n{self.node_id}/{self.layer} @{now_us / 1e6:.6f}s]"

    def debug(self, message: str, now_us: Optional[int] = None):
        self._logger.debug(f"{self._prefix(now_us)} {message}")

    def info(self, message: str, now_us: Optional[int] = None):
        self._logger.info(f"{self._prefix(now_us)} {message}")

    def warning(self, message: str, now_us: Optional[int] = None):
        self._logger.warning(f"{self._prefix(now_us)} {message}")

    def error(self, message: str, now_us: Optional[int] = None):
        self._logger.error(f"{self._prefix(now_us)} {message}")


class RunLogger:
    """单次仿真运行日志记录器"""

    def __init__(self, scenario_name: str, seed: int):
        self.scenario_name = scenario_name
        self.seed = seed
        self._logger = logger.bind(component="run", scenario=scenario_name, seed=seed)

    def log_run_start(self, node_count: int, duration_s: float):
        """记录运行开始"""
        self._logger.info(
            f"[{self.scenario_name}#{self.seed}] 仿真开始: {node_count} 个节点, 时长 {duration_s}s"
        )

    def log_run_complete(self, dispatched: int, wall_ms: int):
        """记录运行完成"""
        self._logger.info(
            f"[{self.scenario_name}#{self.seed}] 仿真完成: 分发事件 {dispatched} 个 (耗时: {wall_ms}ms)"
        )

    def log_run_failed(self, reason: str):
        """记录运行失败"""
        self._logger.error(f"[{self.scenario_name}#{self.seed}] 仿真失败: {reason}")
