"""
Commands Package - ToolNet Pipeline
统一管理所有命令行命令
"""

from app.commands import data, gentest, planning, reporting, training
from app.commands.registry import CommandContext, CommandRouter, CommandSpec, record_performance

# 创建主命令路由器
command_router = CommandRouter()

# 按流水线顺序注册
command_router.include_router(data.router)
command_router.include_router(training.router)
command_router.include_router(gentest.router)
command_router.include_router(planning.router)
command_router.include_router(reporting.router)

__all__ = ["command_router", "CommandContext", "CommandRouter", "CommandSpec", "record_performance"]
