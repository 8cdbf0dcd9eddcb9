"""
ToolNet Pipeline GenTest Schemas
泛化测试用例的Pydantic数据验证模型
"""

from enum import Enum
from typing import Any, Dict, List

from pydantic import BaseModel, Field, field_validator

from app.schemas.world_schemas import GoalDocument, SceneDocument


class GenType(str, Enum):
    """泛化场景类型"""
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"
    V = "V"


class GenBase(BaseModel):
    """生成用例的原始 (goal, scene)"""
    goal_id: int = Field(ge=1, le=8)
    scene_seed: int = Field(ge=0)


class GenCaseDocument(BaseModel):
    """gentest.jsonl 的一行"""
    domain: str
    type: GenType
    variant: str = ""
    base: GenBase
    goal: GoalDocument
    mutation: Dict[str, Any]
    acceptable: List[str]
    scene: SceneDocument

    model_config = {"use_enum_values": True}

    @field_validator("acceptable")
    @classmethod
    def validate_acceptable(cls, v):
        if not v:
            raise ValueError("可接受答案集合不能为空")
        return sorted(set(v))


class GenTypeScore(BaseModel):
    """单一类型的得分"""
    cases: int
    correct: int
    accuracy: float


class GenTestSummary(BaseModel):
    """泛化测试汇总"""
    model: str
    domain: str
    per_type: Dict[str, GenTypeScore]
    total: GenTypeScore
    strict_type_iii: GenTypeScore
    skipped: Dict[str, int] = {}
