"""
ToolNet Pipeline Error Handler
统一错误类型、错误响应与退出码
"""

import logging
import traceback
from typing import Any, Dict, Optional
from datetime import datetime, timezone

from config.settings import settings

logger = logging.getLogger(__name__)


class ToolNetError(Exception):
    """Base class of every pipeline error"""

    error_type = "general_error"


class DimensionError(ToolNetError):
    """Tensor or feature shapes do not agree"""

    error_type = "dimension_error"

    def __init__(self, message: str, *shapes: Any):
        self.shapes = shapes
        if shapes:
            message = f"{message}: " + " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(message)


class ContractError(ToolNetError):
    """A documented precondition of an operation was broken"""

    error_type = "contract_error"


class ObjectLookupError(ToolNetError, KeyError):
    """Unknown object id in a world graph"""

    error_type = "lookup_error"

    def __init__(self, object_id: str):
        self.object_id = object_id
        super().__init__(f"unknown object id: {object_id}")

    def __str__(self) -> str:
        return self.args[0]


class PreconditionViolation(ToolNetError):
    """Action applied in a state where one of its preconditions fails"""

    error_type = "precondition_violation"

    def __init__(self, action: str, predicate: str):
        self.action = action
        self.predicate = predicate
        super().__init__(f"{action}: precondition failed: {predicate}")


class TeachingFailure(ToolNetError):
    """Scripted teacher could not reach the goal"""

    error_type = "teaching_failure"

    def __init__(self, goal: str, predicate: str):
        self.goal = goal
        self.predicate = predicate
        super().__init__(f"cannot teach '{goal}': {predicate}")


class EmbeddingParseError(ToolNetError):
    """Malformed line in an embedding table"""

    error_type = "parse_error"

    def __init__(self, path: str, line_number: int, detail: str):
        self.path = path
        self.line_number = line_number
        super().__init__(f"{path}:{line_number}: {detail}")


class ConfigError(ToolNetError):
    """Config schema violation, always names the offending key"""

    error_type = "config_error"

    def __init__(self, key: str, detail: str = "invalid value"):
        self.key = key
        super().__init__(f"config key {key}: {detail}")


class MissingInputError(ToolNetError):
    """A declared input file does not exist"""

    error_type = "missing_input"

    def __init__(self, path: str):
        self.path = str(path)
        super().__init__(f"missing input: {self.path}")


class TrainingDivergence(ToolNetError):
    """Loss became NaN or infinite"""

    error_type = "training_divergence"

    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")


class SchemaValidationError(ToolNetError):
    """A written output failed validation against its schema"""

    error_type = "schema_validation_error"

    def __init__(self, path: str, detail: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {detail}")


# 退出码：输入/配置问题为 2，其余内部错误为 1
EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2


class ErrorHandler:
    """统一错误处理器"""

    @staticmethod
    def _payload(error_msg: str, error_type: str, **extra: Any) -> Dict[str, Any]:
        payload = {
            "success": False,
            "error": error_msg,
            "error_type": error_type,
            "timestamp": datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
        }
        payload.update({k: v for k, v in extra.items() if v is not None})
        return payload

    @staticmethod
    def handle_config_error(e: ConfigError, operation: str = "配置加载") -> Dict[str, Any]:
        """处理配置错误"""
        logger.error(f"{operation}失败: {e}")
        return ErrorHandler._payload(str(e), e.error_type, key=e.key)

    @staticmethod
    def handle_input_error(e: MissingInputError, operation: str = "读取输入") -> Dict[str, Any]:
        """处理缺失输入"""
        logger.error(f"{operation}失败: {e}")
        return ErrorHandler._payload(str(e), e.error_type, path=e.path)

    @staticmethod
    def handle_pipeline_error(e: ToolNetError, operation: str = "流水线") -> Dict[str, Any]:
        """处理流水线内部错误"""
        logger.error(f"{operation}异常: {e}")
        logger.debug(f"错误堆栈: {traceback.format_exc()}")
        return ErrorHandler._payload(str(e), e.error_type)

    @staticmethod
    def handle_general_error(e: Exception, operation: str = "操作") -> Dict[str, Any]:
        """处理一般错误"""
        logger.error(f"{operation}异常: {str(e)}")
        logger.debug(f"一般错误堆栈: {traceback.format_exc()}")

        error_msg = f"{operation}失败"
        if settings.DEBUG:
            error_msg = f"{operation}失败: {str(e)}"
        return ErrorHandler._payload(error_msg, "internal_error")

    @staticmethod
    def exit_code(e: Optional[BaseException]) -> int:
        """Map an exception to the process exit code"""
        if e is None:
            return EXIT_OK
        if isinstance(e, (ConfigError, MissingInputError)):
            return EXIT_USAGE
        return EXIT_INTERNAL


# 便捷函数
def handle_error(e: Exception, operation: str = "操作") -> Dict[str, Any]:
    """便捷的错误处理函数"""
    if isinstance(e, ConfigError):
        return ErrorHandler.handle_config_error(e, operation)
    if isinstance(e, MissingInputError):
        return ErrorHandler.handle_input_error(e, operation)
    if isinstance(e, ToolNetError):
        return ErrorHandler.handle_pipeline_error(e, operation)
    return ErrorHandler.handle_general_error(e, operation)
