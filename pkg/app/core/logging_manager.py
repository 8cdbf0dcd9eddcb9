"""
日志管理器
统一管理流水线日志输出，减少不必要的控制台输出
"""

import logging
from typing import Any

from config.settings import settings


def _details(kwargs: dict) -> str:
    if not kwargs:
        return ""
    return " (" + ", ".join(f"{k}={v}" for k, v in kwargs.items()) + ")"


class LoggingManager:
    """日志管理器"""

    def __init__(self, name: str = "toolnet"):
        self.logger = logging.getLogger(name)
        self.debug_mode = settings.DEBUG
        self.log_level = getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO)

    def should_log(self, level: int) -> bool:
        """判断是否应该记录日志"""
        return level >= self.log_level

    def log_operation_start(self, operation: str, **kwargs: Any) -> None:
        """记录操作开始（仅在调试模式下）"""
        if self.debug_mode and self.should_log(logging.DEBUG):
            self.logger.debug(f"start: {operation}{_details(kwargs)}")

    def log_operation_success(self, operation: str, **kwargs: Any) -> None:
        """记录操作成功（仅在调试模式下）"""
        if self.debug_mode and self.should_log(logging.DEBUG):
            self.logger.debug(f"done: {operation}{_details(kwargs)}")

    def log_operation_error(self, operation: str, error: str, **kwargs: Any) -> None:
        """记录操作错误（总是记录）"""
        self.logger.error(f"failed: {operation} - {error}{_details(kwargs)}")

    def log_info(self, message: str, **kwargs: Any) -> None:
        """记录信息日志"""
        if self.should_log(logging.INFO):
            self.logger.info(f"{message}{_details(kwargs)}")

    def log_warning(self, message: str, **kwargs: Any) -> None:
        """记录警告日志"""
        if self.should_log(logging.WARNING):
            self.logger.warning(f"{message}{_details(kwargs)}")

# 全局日志管理器实例
logging_manager = LoggingManager()

# 便捷函数
def log_operation_start(operation: str, **kwargs: Any) -> None:
    """记录操作开始"""
    logging_manager.log_operation_start(operation, **kwargs)

def log_operation_success(operation: str, **kwargs: Any) -> None:
    """记录操作成功"""
    logging_manager.log_operation_success(operation, **kwargs)

def log_operation_error(operation: str, error: str, **kwargs: Any) -> None:
    """记录操作错误"""
    logging_manager.log_operation_error(operation, error, **kwargs)

def log_info(message: str, **kwargs: Any) -> None:
    """记录信息日志"""
    logging_manager.log_info(message, **kwargs)

def log_warning(message: str, **kwargs: Any) -> None:
    """记录警告日志"""
    logging_manager.log_warning(message, **kwargs)
