"""
配置模块
"""

from config.config import config, LoggingConfig, OutputConfig, RunnerConfig, SystemConfig

__all__ = ["config", "LoggingConfig", "OutputConfig", "RunnerConfig", "SystemConfig"]
