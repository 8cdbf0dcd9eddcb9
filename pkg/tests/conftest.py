"""
测试公共夹具：小场景、小模型维度、小实验配置
"""

import numpy as np
import pytest

from app.models.toolnet import AblationConfig
from app.models.world_models import Edge, WorldGraph
from app.schemas.corpus_schemas import Split
from app.services.dataset_service import (
    augment_corpus,
    eval_cases,
    generate_corpus,
    label_and_weight,
    split_of,
    tool_vocab,
)
from app.services.embedding_service import hash_provider, make_provider
from app.services.trainer_service import TrainConfig, train
from app.services.world_service import goal_by_id, make_node, make_scene, with_near
from config.pipeline import PipelineConfig

SMALL_DIMS = dict(
    embedding_dim=8,
    hidden_dim=8,
    metric_dim=4,
    head_dim=8,
    propagation_steps=1,
    metric_layers=1,
)


def numeric_grad(f, p, h=1e-5):
    """中心差分数值梯度"""
    grad = np.zeros_like(p.data)
    for idx in np.ndindex(p.data.shape):
        saved = p.data[idx]
        p.data[idx] = saved + h
        up = f().item()
        p.data[idx] = saved - h
        down = f().item()
        p.data[idx] = saved
        grad[idx] = (up - down) / (2 * h)
    return grad


def small_ablation(row: str) -> AblationConfig:
    return AblationConfig.for_row(row, **SMALL_DIMS)


def tiny_world() -> WorldGraph:
    """地面、墙、机器人、一个方块、一个打开的箱子和一个托盘，彼此相距较远"""
    nodes = [
        make_node("floor", "floor", (5.0, 5.0, 0.005), "home"),
        make_node("wall", "wall", (5.0, 9.95, 1.5), "home"),
        make_node("robot", "robot", (1.0, 1.0, 0.9), "home"),
        make_node("cube", "cube", (8.0, 2.0, 0.05), "home"),
        make_node("box", "box", (2.0, 8.0, 0.235), "home", states=frozenset({"open"})),
        make_node("tray", "tray", (8.0, 8.0, 0.03), "home"),
    ]
    edges = frozenset(Edge("OnTop", n.id, "floor") for n in nodes if n.id in ("cube", "box", "tray"))
    return with_near(WorldGraph(domain="home", seed=0, nodes=tuple(nodes), edges=edges))


@pytest.fixture
def world() -> WorldGraph:
    return tiny_world()


@pytest.fixture
def cube_goal():
    return goal_by_id("home", 5)


@pytest.fixture
def provider():
    return hash_provider(SMALL_DIMS["embedding_dim"], 3)


@pytest.fixture(scope="session")
def home_scene() -> WorldGraph:
    return make_scene("home", 7)


@pytest.fixture(scope="session")
def small_config() -> PipelineConfig:
    return PipelineConfig(
        domains=["home"],
        scene_count=2,
        teacher_seeds=2,
        aug_cross_scene_max=1,
        epochs=2,
        patience=1,
        **SMALL_DIMS,
    )


@pytest.fixture(scope="session")
def home_corpus(small_config):
    plans, _ = generate_corpus(small_config, "home")
    return plans


@pytest.fixture
def rng():
    return np.random.default_rng(0)


# ---------------------------------------------------------------- scaled experiments

@pytest.fixture(scope="session")
def scaled_config() -> PipelineConfig:
    """缩小版标准实验：单领域、较少场景，但足以训练出方向性结论"""
    return PipelineConfig(
        domains=["home"],
        scene_count=5,
        teacher_seeds=4,
        aug_cross_scene_max=2,
        embedding_dim=16,
        hidden_dim=16,
        metric_dim=8,
        head_dim=16,
        epochs=60,
        patience=15,
        learning_rate=5e-3,
    )


@pytest.fixture(scope="session")
def scaled_corpus(scaled_config):
    plans, _ = generate_corpus(scaled_config, "home")
    merged, _, _ = augment_corpus(plans, scaled_config)
    return merged


def train_row(row: str, plans, config: PipelineConfig, domain: str = "home"):
    dims = {k: getattr(config, k) for k in SMALL_DIMS}
    ablation = AblationConfig.for_row(row, **dims)
    provider = make_provider(config.embedding_dim, config.embedding_seed, ablation.conceptnet)
    groups = label_and_weight(split_of(plans, Split.TRAIN), config.w_opt, ablation.weighting)
    val = eval_cases(split_of(plans, Split.VAL))
    result = train(groups, val, ablation, TrainConfig.from_pipeline(config), provider, tool_vocab(domain), domain=domain)
    return result.model, provider


@pytest.fixture(scope="session")
def scaled_model(scaled_config, scaled_corpus):
    """按消融行训练并缓存模型"""
    trained = {}

    def get(row: str):
        if row not in trained:
            trained[row] = train_row(row, scaled_corpus, scaled_config)
        return trained[row]

    return get
