"""
ToolNet Pipeline 通用模型
Common models shared by all commands
"""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel


class CommandResult(BaseModel):
    """命令执行结果"""
    command: str
    success: bool = True
    outputs: List[str] = []
    summary: Dict[str, Any] = {}
    message: str = "success"


class ErrorResponse(BaseModel):
    """错误响应模型"""
    success: bool = False
    error: str
    error_type: str
    timestamp: Optional[str] = None
    key: Optional[str] = None
    path: Optional[str] = None
