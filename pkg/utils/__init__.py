"""
工具模块
"""

from utils.logger import NodeLogger, RunLogger, get_logger, setup_logger
from utils.rng import RngStream, RngStreams

__all__ = ["setup_logger", "get_logger", "NodeLogger", "RunLogger", "RngStream", "RngStreams"]
