"""
ToolNet Pipeline Corpus Schemas
演示语料与增强报告的Pydantic数据验证模型
"""

from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator

from app.core.constants import DomainConstants
from app.models.world_models import SymbolicAction


class PlanSource(str, Enum):
    """计划来源"""
    TEACHER = "teacher"
    CROSS_SCENE = "cross-scene"
    REMOVAL = "removal"


class Split(str, Enum):
    """数据划分"""
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


PairKey = Tuple[str, int, int, Tuple[str, ...]]


class DemoPlan(BaseModel):
    """一条演示计划；场景按 (domain, seed, removed) 引用"""
    domain: str
    goal_id: int = Field(ge=1, le=8)
    scene_seed: int = Field(ge=0)
    removed: List[str] = []
    style_seed: int = 0
    actions: List[str]
    tools_used: List[str] = []
    sim_cost: float = Field(ge=0)
    optimal: bool = False
    source: PlanSource = PlanSource.TEACHER
    provenance: str = ""
    split: Split = Split.TRAIN

    model_config = {"use_enum_values": True}

    @field_validator("domain")
    @classmethod
    def validate_domain(cls, v):
        if v not in DomainConstants.DOMAINS:
            raise ValueError(f"未知领域: {v}")
        return v

    @field_validator("actions")
    @classmethod
    def validate_actions(cls, v):
        for text in v:
            SymbolicAction.parse(text)
        return v

    @field_validator("tools_used", "removed")
    @classmethod
    def sort_tokens(cls, v):
        return sorted(set(v))

    @property
    def pair_key(self) -> PairKey:
        return (self.domain, self.goal_id, self.scene_seed, tuple(self.removed))

    def parsed_actions(self) -> List[SymbolicAction]:
        return [SymbolicAction.parse(a) for a in self.actions]

    def sort_key(self) -> tuple:
        return (self.domain, self.goal_id, self.scene_seed, tuple(self.removed), self.style_seed,
                self.source, self.provenance, tuple(self.actions))


class StrategyCount(BaseModel):
    """增强策略统计"""
    attempted: int = 0
    accepted: int = 0
    duplicates: int = 0


class GoalStatistics(BaseModel):
    """单个目标的语料统计"""
    goal_id: int
    text: str
    plans: int
    actions_mean: float
    actions_std: float
    interacted_mean: float
    interacted_std: float
    tools_mean: float
    tools_std: float
    cost_mean: float
    cost_std: float
    tool_histogram: Dict[str, int] = {}


class AugmentReport(BaseModel):
    """report.json"""
    domains: List[str]
    corpus_size: Dict[str, int]
    augmented_size: Dict[str, int]
    cross_scene: Dict[str, StrategyCount]
    removal: Dict[str, StrategyCount]
    split_sizes: Dict[str, Dict[str, int]]
    goals: Dict[str, List[GoalStatistics]]
    diversity: Dict[str, float] = {}
    config_fingerprint: Optional[dict] = None
