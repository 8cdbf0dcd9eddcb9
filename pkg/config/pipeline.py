"""
Pipeline Configuration
实验配置：扁平 KEY=VALUE 文件 + 命令行覆盖
"""

import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from app.core.error_handler import ConfigError, MissingInputError

logger = logging.getLogger(__name__)


ABLATION_ROWS = ("ggcn", "metric", "attn", "l", "nt", "c", "w", "full")


class PipelineConfig(BaseModel):
    """所有实验参数与随机种子"""

    model_config = {"extra": "forbid", "validate_assignment": True}

    # 场景
    domains: List[Literal["home", "factory"]] = Field(default=["home", "factory"], description="参与的领域")
    scene_count: int = Field(10, ge=2, description="每个领域的场景数")
    scene_seed: int = Field(7, ge=0, description="首个场景种子，场景 i 使用 scene_seed + i")
    holdout_scene_index: int = Field(-1, description="验证/测试场景下标，-1 为最后一个")

    # 示教
    teacher_seeds: int = Field(8, ge=1, description="每个 (goal, scene) 的示教次数")
    teacher_seed: int = Field(11, ge=0)
    removal_seed: int = Field(5, ge=0)
    aug_removal_variants: int = Field(1, ge=0, description="每个计划的物体删除增强数")
    aug_cross_scene_max: int = Field(8, ge=0, description="每个计划最多重放的目标场景数")

    # 词向量
    embedding_dim: int = Field(32, ge=1)
    embedding_seed: int = Field(3, ge=0)
    embedding_table: str = Field("", description="可选的词向量文本文件")

    # 模型
    hidden_dim: int = Field(32, ge=1)
    propagation_steps: int = Field(2, ge=1)
    metric_layers: int = Field(2, ge=1)
    metric_dim: int = Field(16, ge=1)
    head_dim: int = Field(32, ge=1)
    ablation: str = Field("full", description="ggcn|metric|attn|l|nt|c|w|full")

    # 训练
    epochs: int = Field(200, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    optimizer: Literal["adam", "sgd"] = "adam"
    adam_beta1: float = Field(0.9, gt=0, lt=1)
    adam_beta2: float = Field(0.999, gt=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)
    batch_size: int = Field(1, ge=1)
    patience: int = Field(20, ge=1)
    train_seed: int = Field(1, ge=0)
    w_opt: float = Field(2.0, gt=0)

    # 规划
    planner_budget: int = Field(50000, ge=1)
    planner_pairs: int = Field(20, ge=1)
    planner_max_depth: int = Field(4, ge=1)
    planner_neutral_priority: float = Field(0.5, gt=0, le=1)

    # 泛化测试
    gentest_seed: int = Field(13, ge=0)

    @field_validator("ablation")
    @classmethod
    def _check_ablation(cls, v: str) -> str:
        v = v.strip().lower().lstrip("+")
        if v not in ABLATION_ROWS:
            raise ValueError(f"must be one of {', '.join(ABLATION_ROWS)}")
        return v

    @field_validator("domains", mode="before")
    @classmethod
    def _split_domains(cls, v):
        if isinstance(v, str):
            return [d.strip() for d in v.split(",") if d.strip()]
        return v

    @model_validator(mode="after")
    def _check_holdout(self) -> "PipelineConfig":
        if not -self.scene_count <= self.holdout_scene_index < self.scene_count:
            raise ValueError("holdout_scene_index out of range")
        return self

    @property
    def holdout_index(self) -> int:
        return self.holdout_scene_index % self.scene_count

    def scene_seeds(self) -> List[int]:
        return [self.scene_seed + i for i in range(self.scene_count)]

    def holdout_seed(self) -> int:
        return self.scene_seeds()[self.holdout_index]

    def fingerprint(self) -> Dict[str, object]:
        return self.model_dump()


def _field_for(key: str) -> str:
    name = key.strip().lower()
    if name not in PipelineConfig.model_fields:
        raise ConfigError(key, "unknown key")
    return name


def _error_key(e: ValidationError) -> str:
    loc = e.errors()[0].get("loc") or ("config",)
    return str(loc[0]).upper()


def parse_overrides(pairs: Optional[List[str]]) -> Dict[str, str]:
    """解析 --set KEY=VALUE"""
    overrides: Dict[str, str] = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(pair, "expected KEY=VALUE")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def load_pipeline_config(
    path: Optional[str] = None,
    overrides: Optional[Dict[str, str]] = None,
) -> PipelineConfig:
    """加载配置文件并应用覆盖项"""
    raw: Dict[str, Optional[str]] = {}
    if path:
        config_path = Path(path)
        if not config_path.is_file():
            raise MissingInputError(str(config_path))
        raw.update(dotenv_values(config_path))
    raw.update(overrides or {})

    values = {}
    for key, value in raw.items():
        if value is None:
            raise ConfigError(key, "missing value")
        values[_field_for(key)] = value

    try:
        config = PipelineConfig(**values)
    except ValidationError as e:
        raise ConfigError(_error_key(e), e.errors()[0].get("msg", "invalid value")) from e

    logger.debug(f"配置加载完成: {len(values)} 项显式设置")
    return config
