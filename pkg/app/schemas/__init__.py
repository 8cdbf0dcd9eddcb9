"""
ToolNet Pipeline Schemas Package
统一导入所有文件格式的Pydantic数据验证模型
"""

# 场景与目标
from .world_schemas import SceneNode, SceneEdge, SceneDocument, ConstraintDocument, GoalDocument

# 语料
from .corpus_schemas import (
    PlanSource, Split, DemoPlan, StrategyCount, GoalStatistics, AugmentReport
)

# 泛化测试
from .gentest_schemas import GenType, GenBase, GenCaseDocument, GenTypeScore, GenTestSummary

# 训练与结果
from .result_schemas import (
    RESULT_COLUMNS, EpochRecord, TrainingHistory, ResultRow, SearchRecord, PlannerSummary
)

# 通用
from .common_schemas import CommandResult, ErrorResponse

__all__ = [
    # 场景
    "SceneNode", "SceneEdge", "SceneDocument", "ConstraintDocument", "GoalDocument",

    # 语料
    "PlanSource", "Split", "DemoPlan", "StrategyCount", "GoalStatistics", "AugmentReport",

    # 泛化测试
    "GenType", "GenBase", "GenCaseDocument", "GenTypeScore", "GenTestSummary",

    # 结果
    "RESULT_COLUMNS", "EpochRecord", "TrainingHistory", "ResultRow", "SearchRecord", "PlannerSummary",

    # 通用
    "CommandResult", "ErrorResponse",
]
