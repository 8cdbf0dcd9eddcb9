"""
ToolNet Pipeline Services Package
统一导入所有流水线服务
"""

from .storage_service import RunStorage, get_storage_service
from .embedding_service import EmbeddingProvider, make_provider
from .dataset_service import SceneCache, scene_cache
from .trainer_service import TrainConfig, evaluate, train
from .planner_service import effective_branching_factor, search
from .report_service import build_report

__all__ = [
    "RunStorage",
    "get_storage_service",
    "EmbeddingProvider",
    "make_provider",
    "SceneCache",
    "scene_cache",
    "TrainConfig",
    "evaluate",
    "train",
    "effective_branching_factor",
    "search",
    "build_report",
]
