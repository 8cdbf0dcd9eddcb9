"""
ToolNet Pipeline Core Package
统一导入所有核心功能模块
"""

from .error_handler import (
    ErrorHandler,
    handle_error,
    ToolNetError,
    DimensionError,
    ContractError,
    ObjectLookupError,
    PreconditionViolation,
    TeachingFailure,
    EmbeddingParseError,
    ConfigError,
    MissingInputError,
    TrainingDivergence,
    SchemaValidationError,
)
from .performance_monitor import performance_monitor, monitor_performance
from .cache_manager import CacheManager
from .background_tasks import WorkerPool

__all__ = [
    "ErrorHandler",
    "handle_error",
    "ToolNetError",
    "DimensionError",
    "ContractError",
    "ObjectLookupError",
    "PreconditionViolation",
    "TeachingFailure",
    "EmbeddingParseError",
    "ConfigError",
    "MissingInputError",
    "TrainingDivergence",
    "SchemaValidationError",
    "performance_monitor",
    "monitor_performance",
    "CacheManager",
    "WorkerPool",
]
