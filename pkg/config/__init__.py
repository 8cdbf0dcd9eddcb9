"""
ToolNet Pipeline Configuration Package
进程级设置在 settings，实验配置在 config.pipeline
"""

from .settings import settings, Settings

__all__ = ["settings", "Settings"]
