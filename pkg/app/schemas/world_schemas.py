"""
ToolNet Pipeline World Schemas
场景与目标文件的Pydantic数据验证模型
"""

from typing import List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from app.core.constants import WorldConstants


class SceneNode(BaseModel):
    """场景节点"""
    id: str
    class_: str = Field(alias="class")
    categories: List[str] = []
    states: List[str] = []
    pos: List[float]
    size: List[float]
    flags: List[str] = []
    functions: List[str] = []
    capacity: Optional[List[float]] = None
    climb_height: float = 0.0
    goal_bit: int = Field(0, ge=0, le=1)

    model_config = {"populate_by_name": True}

    @field_validator("pos", "size")
    @classmethod
    def validate_vec3(cls, v):
        if len(v) != 3:
            raise ValueError("必须是三维向量")
        return v

    @field_validator("size")
    @classmethod
    def validate_size(cls, v):
        if min(v) <= 0:
            raise ValueError("尺寸必须大于0")
        return v

    @field_validator("states")
    @classmethod
    def validate_states(cls, v):
        unknown = [s for s in v if s not in WorldConstants.ATTRIBUTES]
        if unknown:
            raise ValueError(f"未知状态: {unknown}")
        return v

    @field_validator("flags")
    @classmethod
    def validate_flags(cls, v):
        unknown = [f for f in v if f not in WorldConstants.FLAGS]
        if unknown:
            raise ValueError(f"未知标志: {unknown}")
        return v


class SceneEdge(BaseModel):
    """关系边"""
    type: str
    src: str
    dst: str

    @field_validator("type")
    @classmethod
    def validate_type(cls, v):
        if v not in WorldConstants.RELATIONS:
            raise ValueError(f"未知关系: {v}")
        return v


class SceneDocument(BaseModel):
    """场景文件"""
    domain: str
    seed: int = Field(ge=0)
    agent_at: Optional[str] = None
    removed: List[str] = []
    nodes: List[SceneNode]
    edges: List[SceneEdge]

    @model_validator(mode="after")
    def validate_endpoints(self):
        ids = {n.id for n in self.nodes}
        if len(ids) != len(self.nodes):
            raise ValueError("节点ID重复")
        for e in self.edges:
            if e.src not in ids or e.dst not in ids:
                raise ValueError(f"边的端点不存在: {e.src} -> {e.dst}")
            if e.src == e.dst:
                raise ValueError(f"自环边: {e.src}")
        if WorldConstants.AGENT_ID not in ids:
            raise ValueError("缺少机器人节点")
        return self


class ConstraintDocument(BaseModel):
    """目标约束"""
    kind: str
    subject: str
    target: str = ""
    attributes: List[str] = []
    value: bool = True
    quantifier: str = "all"

    @field_validator("kind")
    @classmethod
    def validate_kind(cls, v):
        if v not in ("inside", "ontop", "connected", "state"):
            raise ValueError(f"未知约束类型: {v}")
        return v

    @field_validator("quantifier")
    @classmethod
    def validate_quantifier(cls, v):
        if v not in ("all", "any"):
            raise ValueError("量词必须是 all 或 any")
        return v


class GoalDocument(BaseModel):
    """目标记录"""
    domain: str
    goal_id: int = Field(ge=1, le=8)
    text: List[str]
    objects: List[str]
    constraints: List[ConstraintDocument]

    @model_validator(mode="after")
    def validate_objects(self):
        missing = [t for t in self.objects if t not in self.text]
        if missing:
            raise ValueError(f"目标物体词不在目标文本中: {missing}")
        return self
