"""
ToolNet Pipeline Result Schemas
训练历史、结果表与规划对比的Pydantic数据验证模型
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator


RESULT_COLUMNS = (
    "model", "test_home", "test_factory",
    "gentest_I", "gentest_II", "gentest_III", "gentest_IV", "gentest_V",
    "gentest_home", "gentest_factory",
)


class EpochRecord(BaseModel):
    """单轮训练记录"""
    epoch: int = Field(ge=1)
    loss: float
    val_accuracy: float = Field(ge=0, le=1)


class TrainingHistory(BaseModel):
    """history.json 中一个模型的训练历史"""
    model: str
    domain: str
    parameters: int
    epochs: List[EpochRecord]
    best_epoch: int
    best_val_accuracy: float
    test_accuracy: Optional[float] = None
    checkpoint: str = ""


class ResultRow(BaseModel):
    """results.csv 的一行"""
    model: str
    test_home: Optional[float] = None
    test_factory: Optional[float] = None
    gentest_I: Optional[float] = None
    gentest_II: Optional[float] = None
    gentest_III: Optional[float] = None
    gentest_IV: Optional[float] = None
    gentest_V: Optional[float] = None
    gentest_home: Optional[float] = None
    gentest_factory: Optional[float] = None

    @field_validator(*RESULT_COLUMNS[1:], mode="before")
    @classmethod
    def parse_blank(cls, v):
        if v == "" or v is None:
            return None
        return float(v)

    def to_row(self) -> Dict[str, str]:
        row = {}
        for column in RESULT_COLUMNS:
            value = getattr(self, column)
            row[column] = value if isinstance(value, str) else ("" if value is None else f"{value:.2f}")
        return row


class SearchRecord(BaseModel):
    """一次规划搜索的统计"""
    domain: str
    goal_id: int
    scene_seed: int
    mode: str
    found: bool
    nodes_expanded: int = Field(ge=1)
    depth: Optional[int] = None
    branching_factor: Optional[float] = None
    wall_time: float = Field(ge=0)
    plan: List[str] = []
    model_queries: int = 0

    @field_validator("mode")
    @classmethod
    def validate_mode(cls, v):
        if v not in ("uninformed", "guided"):
            raise ValueError("搜索模式必须是 uninformed 或 guided")
        return v


class PlannerSummary(BaseModel):
    """规划对比汇总"""
    domain: str
    pairs: int
    found: Dict[str, int]
    ebf_mean: Dict[str, Optional[float]]
    ebf_std: Dict[str, Optional[float]]
    nodes_mean: Dict[str, float]
    pruned_pairs: int
    pruned_fraction: float
