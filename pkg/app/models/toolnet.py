"""
ToolNet Pipeline Model
门控图卷积编码器 + 度量分支、目标注意力、分解似然、无工具头

工具头与无工具头均为两层 MLP（tanh 隐层 + sigmoid 输出）；
目标注意力采用加性打分 softmax(v · tanh(W[h; g] + b))，在节点维上归一化。
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

from app.core.constants import NO_TOOL, WorldConstants
from app.core.error_handler import ConfigError, ContractError, DimensionError
from app.models import autodiff as ad
from app.models.autodiff import DTensor
from app.models.world_models import GoalSpec, WorldGraph

logger = logging.getLogger(__name__)

# 有向关系的正反两个方向 + 对称的 Near
RELATION_CHANNELS: Tuple[Tuple[str, bool], ...] = (
    ("OnTop", False), ("OnTop", True),
    ("Inside", False), ("Inside", True),
    ("ConnectedTo", False), ("ConnectedTo", True),
    ("Near", False),
)

STATE_FEATURES = len(WorldConstants.ATTRIBUTES) + 3 + 3 + 1

# 消融递增行：(行名, 标签, 打开的开关)
ABLATION_LADDER: Tuple[Tuple[str, str, Tuple[str, ...]], ...] = (
    ("ggcn", "GGCN", ()),
    ("metric", "+Metric", ("metric",)),
    ("attn", "+Attn", ("metric", "attn")),
    ("l", "+L", ("metric", "attn", "factored")),
    ("nt", "+NT", ("metric", "attn", "factored", "no_tool_head")),
    ("c", "+C", ("metric", "attn", "factored", "no_tool_head", "conceptnet")),
    ("w", "+W", ("metric", "attn", "factored", "no_tool_head", "conceptnet", "weighting")),
)


class AblationConfig(BaseModel):
    """模型组件开关与维度"""

    model_config = {"frozen": True}

    metric: bool = False
    attn: bool = False
    factored: bool = False
    no_tool_head: bool = False
    conceptnet: bool = False
    weighting: bool = False
    embedding_dim: int = Field(32, ge=1)
    hidden_dim: int = Field(32, ge=1)
    propagation_steps: int = Field(2, ge=1)
    metric_layers: int = Field(2, ge=1)
    metric_dim: int = Field(16, ge=1)
    head_dim: int = Field(32, ge=1)

    @model_validator(mode="after")
    def _attention_needs_metric(self) -> "AblationConfig":
        if self.attn and not self.metric:
            raise ConfigError("attn", "attention consumes [h; m] and requires the metric branch")
        return self

    @classmethod
    def for_row(cls, row: str, **dims) -> "AblationConfig":
        row = "w" if row == "full" else row
        for name, _, flags in ABLATION_LADDER:
            if name == row:
                return cls(**{flag: True for flag in flags}, **dims)
        raise ConfigError("ablation", f"unknown ablation row {row}")

    @property
    def label(self) -> str:
        label = "custom"
        for _, row_label, flags in ABLATION_LADDER:
            if all(getattr(self, f) for f in flags):
                label = row_label
        return label

    @property
    def node_dim(self) -> int:
        return self.hidden_dim + (self.metric_dim if self.metric else 0)


@dataclass(frozen=True)
class ToolDistribution:
    """τ̂ 上的似然：工具词 + 最后一位 no-tool"""

    tokens: Tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        if len(self.tokens) != len(self.values):
            raise DimensionError("distribution tokens and values differ", (len(self.tokens),), self.values.shape)
        if not self.tokens or self.tokens[-1] != NO_TOOL:
            raise ContractError("distribution must end with the no-tool slot")

    def prob(self, token: str) -> float:
        return float(self.values[self.tokens.index(token)])

    @property
    def no_tool(self) -> float:
        return float(self.values[-1])

    def as_dict(self) -> Dict[str, float]:
        return {t: float(v) for t, v in zip(self.tokens, self.values)}

    def argmax_tool(self) -> str:
        return argmax_tool(self)


def argmax_tool(dist: ToolDistribution) -> str:
    """最大项；并列时取字典序最小的工具，no-tool 输掉所有并列"""
    best = float(np.max(dist.values))
    tied = [t for t, v in zip(dist.tokens, dist.values) if v == best]
    tools = sorted(t for t in tied if t != NO_TOOL)
    return tools[0] if tools else NO_TOOL


@dataclass
class GraphInput:
    """一次前向所需的常量输入（可在训练前预先计算）"""

    features: np.ndarray
    metric_input: np.ndarray
    adjacency: List[np.ndarray]
    goal_text: np.ndarray
    goal_objects: np.ndarray
    candidates: Tuple[str, ...]
    candidate_embeddings: np.ndarray

    @property
    def tokens(self) -> Tuple[str, ...]:
        return self.candidates + (NO_TOOL,)


def node_features(w: WorldGraph, provider) -> np.ndarray:
    """[e_v; l_v; pos_v/10; size_v/2; g_v]"""
    rows = []
    for n in w.nodes:
        rows.append(np.concatenate([
            provider.embed(n.token),
            n.state_vector(),
            np.asarray(n.pos) / WorldConstants.FLOOR_EXTENT,
            np.asarray(n.size) / WorldConstants.SIZE_SCALE,
            [float(n.goal_bit)],
        ]))
    return np.array(rows)


def metric_features(w: WorldGraph, provider) -> np.ndarray:
    """[e_v; pos_v/10; size_v/2]"""
    return np.array([
        np.concatenate([
            provider.embed(n.token),
            np.asarray(n.pos) / WorldConstants.FLOOR_EXTENT,
            np.asarray(n.size) / WorldConstants.SIZE_SCALE,
        ])
        for n in w.nodes
    ])


def adjacency(w: WorldGraph) -> List[np.ndarray]:
    """每个关系通道的入邻接矩阵 A[dst, src]"""
    position = {n.id: i for i, n in enumerate(w.nodes)}
    size = len(w.nodes)
    mats = [np.zeros((size, size)) for _ in RELATION_CHANNELS]
    for e in w.edges:
        src, dst = position[e.src], position[e.dst]
        for k, (rel, reverse) in enumerate(RELATION_CHANNELS):
            if rel != e.rel:
                continue
            if reverse:
                mats[k][src, dst] = 1.0
            else:
                mats[k][dst, src] = 1.0
    return mats


def scene_candidates(w: WorldGraph, extra_tokens: Sequence[str] = ()) -> Tuple[str, ...]:
    """候选工具：场景中可移动的工具 + 外部给定的词"""
    present = {n.token for n in w.nodes if n.is_tool and n.has("is-movable")}
    return tuple(sorted(present | set(extra_tokens)))


class ToolNet:
    """p(t | S, goal) 预测模型"""

    def __init__(self, config: AblationConfig, tool_vocab: Sequence[str], seed: int = 0):
        self.config = config
        self.tool_vocab = tuple(sorted(tool_vocab))
        self.seed = seed
        self.params: Dict[str, DTensor] = {}
        self._init_params(np.random.default_rng(seed))
        logger.info(f"模型初始化: {config.label}, 参数量 {self.parameter_count()}")

    # ------------------------------------------------------------ params

    def _weight(self, rng, name: str, fan_in: int, fan_out: int) -> None:
        self.params[name] = ad.parameter(rng.normal(0.0, 1.0 / np.sqrt(fan_in), (fan_in, fan_out)), name)

    def _bias(self, name: str, width: int, value: float = 0.0) -> None:
        self.params[name] = ad.parameter(np.full((1, width), value), name)

    def _init_params(self, rng) -> None:
        c = self.config
        d, h = c.embedding_dim, c.hidden_dim
        self._weight(rng, "W_init", d + STATE_FEATURES, h)
        for rel, reverse in RELATION_CHANNELS:
            self._weight(rng, self._channel_name(rel, reverse), h, h)
        for gate in ("z", "r", "h"):
            self._weight(rng, f"W_{gate}", 2 * h, h)
            self._bias(f"b_{gate}", h)
        if c.metric:
            fan_in = d + 6
            for layer in range(c.metric_layers):
                self._weight(rng, f"W_metric_{layer}", fan_in, c.metric_dim)
                self.params[f"prelu_{layer}"] = ad.parameter([[0.25]], f"prelu_{layer}")
                fan_in = c.metric_dim
        node_dim = c.node_dim
        if c.attn:
            self._weight(rng, "W_attn", node_dim + d, c.head_dim)
            self._bias("b_attn", c.head_dim)
            self._weight(rng, "v_attn", c.head_dim, 1)
        context = node_dim + d
        if c.factored:
            self._weight(rng, "head_W1", d + context, c.head_dim)
            self._bias("head_b1", c.head_dim)
            self._weight(rng, "head_W2", c.head_dim, 1)
            self._bias("head_b2", 1)
        else:
            width = len(self.tool_vocab) + (0 if c.no_tool_head else 1)
            self._weight(rng, "head_W1", context, c.head_dim)
            self._bias("head_b1", c.head_dim)
            self._weight(rng, "head_W2", c.head_dim, width)
            self._bias("head_b2", width)
        if c.no_tool_head:
            self._weight(rng, "nt_W1", context, c.head_dim)
            self._bias("nt_b1", c.head_dim)
            self._weight(rng, "nt_W2", c.head_dim, 1)
            self._bias("nt_b2", 1)

    @staticmethod
    def _channel_name(rel: str, reverse: bool) -> str:
        return f"W_p_{rel}{'_rev' if reverse else ''}"

    def parameter_count(self) -> int:
        return int(sum(p.data.size for p in self.params.values()))

    def zero_grad(self) -> None:
        ad.zero_grad(self.params.values())

    def shapes(self) -> Dict[str, Tuple[int, int]]:
        return {name: p.shape for name, p in self.params.items()}

    # ------------------------------------------------------------ inputs

    def prepare(self, w: WorldGraph, goal: GoalSpec, provider, extra_tokens: Sequence[str] = ()) -> GraphInput:
        if provider.dim != self.config.embedding_dim:
            raise DimensionError("provider dimension differs from model", (provider.dim,), (self.config.embedding_dim,))
        world = w.with_goal(goal)
        if self.config.factored:
            candidates = scene_candidates(world, extra_tokens)
        else:
            candidates = self.tool_vocab
        if candidates:
            cand_emb = np.array([provider.embed(t) for t in candidates])
        else:
            cand_emb = np.zeros((0, provider.dim))
        return GraphInput(
            features=node_features(world, provider),
            metric_input=metric_features(world, provider),
            adjacency=adjacency(world),
            goal_text=provider.bow(goal.text_tokens),
            goal_objects=provider.bow(goal.object_tokens),
            candidates=tuple(candidates),
            candidate_embeddings=cand_emb,
        )

    # ------------------------------------------------------------ encoder

    def node_init(self, inp: GraphInput) -> DTensor:
        x = ad.constant(inp.features)
        w_init = self.params["W_init"]
        if x.shape[1] != w_init.shape[0]:
            raise DimensionError("node feature width differs from W_init", x.shape, w_init.shape)
        return ad.tanh(x @ w_init)

    def propagate(self, h: DTensor, inp: GraphInput) -> DTensor:
        """一步图卷积聚合 + GRU 门控更新"""
        p = self.params
        x: Optional[DTensor] = None
        for (rel, reverse), a in zip(RELATION_CHANNELS, inp.adjacency):
            term = ad.constant(a) @ (h @ p[self._channel_name(rel, reverse)])
            x = term if x is None else ad.add(x, term)
        xh = ad.concat([x, h])
        z = ad.sigmoid(ad.add_bias(xh @ p["W_z"], p["b_z"]))
        r = ad.sigmoid(ad.add_bias(xh @ p["W_r"], p["b_r"]))
        h_cand = ad.tanh(ad.add_bias(ad.concat([x, ad.hadamard(r, h)]) @ p["W_h"], p["b_h"]))
        return ad.add(ad.hadamard(ad.one_minus(z), h), ad.hadamard(z, h_cand))

    def metric_encode(self, inp: GraphInput) -> DTensor:
        m = ad.constant(inp.metric_input)
        for layer in range(self.config.metric_layers):
            m = ad.prelu(m @ self.params[f"W_metric_{layer}"], self.params[f"prelu_{layer}"])
        return m

    def node_states(self, inp: GraphInput) -> DTensor:
        h = self.node_init(inp)
        for _ in range(self.config.propagation_steps):
            h = self.propagate(h, inp)
        if self.config.metric:
            h = ad.concat([h, self.metric_encode(inp)])
        return h

    def attention(self, states: DTensor, inp: GraphInput) -> DTensor:
        """节点上的目标条件注意力权重（列向量）"""
        p = self.params
        goal = ad.tile_rows(ad.constant(inp.goal_objects), states.shape[0])
        hidden = ad.tanh(ad.add_bias(ad.concat([states, goal]) @ p["W_attn"], p["b_attn"]))
        return ad.softmax(hidden @ p["v_attn"], axis=0)

    def encode_scene(self, inp: GraphInput) -> Tuple[DTensor, Optional[DTensor]]:
        states = self.node_states(inp)
        if self.config.attn:
            alpha = self.attention(states, inp)
            return ad.transpose(alpha) @ states, alpha
        return ad.sum_reduce(states, axis=0), None

    # ------------------------------------------------------------ heads

    def _mlp(self, x: DTensor, prefix: str) -> DTensor:
        p = self.params
        hidden = ad.tanh(ad.add_bias(x @ p[f"{prefix}_W1"], p[f"{prefix}_b1"]))
        return ad.add_bias(hidden @ p[f"{prefix}_W2"], p[f"{prefix}_b2"])

    def forward(self, inp: GraphInput) -> DTensor:
        """返回 1×|τ̂| 的似然行向量，顺序为 inp.tokens"""
        h_scene, _ = self.encode_scene(inp)
        context = ad.concat([h_scene, ad.constant(inp.goal_text)])
        c = self.config
        if c.factored:
            rows = inp.candidate_embeddings
            if not c.no_tool_head:
                rows = np.vstack([rows, np.zeros((1, c.embedding_dim))])
            if len(rows):
                scored = ad.concat([ad.constant(rows), ad.tile_rows(context, len(rows))])
                p_tools = ad.transpose(ad.sigmoid(self._mlp(scored, "head")))
            else:
                p_tools = None
        else:
            p_tools = ad.sigmoid(self._mlp(context, "head"))
        if not c.no_tool_head:
            return p_tools
        p_none = ad.sigmoid(self._mlp(context, "nt"))
        if p_tools is None:
            return p_none
        return ad.concat([ad.scale_by(p_tools, ad.one_minus(p_none)), p_none])

    def predict_input(self, inp: GraphInput) -> ToolDistribution:
        return ToolDistribution(inp.tokens, self.forward(inp).data.reshape(-1).copy())

    def predict(self, w: WorldGraph, goal: GoalSpec, provider, extra_tokens: Sequence[str] = ()) -> ToolDistribution:
        return self.predict_input(self.prepare(w, goal, provider, extra_tokens))

    # ------------------------------------------------------------ checkpoint

    def header(self, provider) -> dict:
        return {
            "ablation": self.config.model_dump(),
            "tool_vocab": list(self.tool_vocab),
            "seed": self.seed,
            "provider": provider.fingerprint(),
        }

    def save(self, path: Union[str, Path], provider) -> Path:
        return ad.save_params(path, self.params, self.header(provider))

    @classmethod
    def load(cls, path: Union[str, Path], provider=None) -> "ToolNet":
        arrays, header = ad.load_params(path)
        if provider is not None and header.get("provider") != provider.fingerprint():
            raise ContractError(f"checkpoint {path} was trained with a different embedding provider")
        model = cls(AblationConfig(**header["ablation"]), header["tool_vocab"], header.get("seed", 0))
        for name, p in model.params.items():
            if name not in arrays:
                raise ContractError(f"checkpoint {path} lacks parameter {name}")
            if arrays[name].shape != p.shape:
                raise DimensionError(f"checkpoint parameter {name}", arrays[name].shape, p.shape)
            p.data = arrays[name].copy()
            p.zero_grad()
        return model
