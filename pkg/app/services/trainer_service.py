"""
ToolNet Pipeline Trainer Service
（加权）二元交叉熵训练、早停、准确率评估与结果表
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from app.core.background_tasks import WorkerPool
from app.core.error_handler import ContractError, DimensionError, TrainingDivergence
from app.core.logging_manager import log_info
from app.core.performance_monitor import performance_monitor
from app.models import autodiff as ad
from app.models.autodiff import DTensor
from app.models.toolnet import AblationConfig, GraphInput, ToolNet, argmax_tool
from app.schemas.result_schemas import EpochRecord, ResultRow, TrainingHistory
from app.services.dataset_service import EvalCase, TrainingGroup
from config.pipeline import PipelineConfig

logger = logging.getLogger(__name__)

EPS = 1e-9


class TrainConfig(BaseModel):
    """优化器与训练循环参数"""

    model_config = {"frozen": True}

    epochs: int = Field(200, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    optimizer: Literal["adam", "sgd"] = "adam"
    beta1: float = Field(0.9, gt=0, lt=1)
    beta2: float = Field(0.999, gt=0, lt=1)
    eps: float = Field(1e-8, gt=0)
    batch_size: int = Field(1, ge=1)
    seed: int = Field(1, ge=0)
    patience: int = Field(20, ge=1)
    w_opt: float = Field(2.0, gt=0)

    @classmethod
    def from_pipeline(cls, config: PipelineConfig) -> "TrainConfig":
        return cls(
            epochs=config.epochs,
            learning_rate=config.learning_rate,
            optimizer=config.optimizer,
            beta1=config.adam_beta1,
            beta2=config.adam_beta2,
            eps=config.adam_eps,
            batch_size=config.batch_size,
            seed=config.train_seed,
            patience=config.patience,
            w_opt=config.w_opt,
        )


# ====================================================================== losses

def _check_width(pred: DTensor, width: int) -> None:
    if pred.shape != (1, width):
        raise DimensionError("prediction and label lengths differ", pred.shape, (1, width))


def bce_loss(pred: DTensor, y: Sequence[float], alpha: float = 1.0, weighting: bool = False) -> DTensor:
    """−Σ_j [y_j log p_j + (1−y_j) log(1−p_j)]，p 截断到 [ε, 1−ε]；weighting 时乘 α"""
    y = np.asarray(y, dtype=np.float64).reshape(1, -1)
    _check_width(pred, y.shape[1])
    p = ad.clip(pred, EPS, 1.0 - EPS)
    pos = ad.hadamard(ad.constant(y), ad.log(p))
    neg = ad.hadamard(ad.constant(1.0 - y), ad.log(ad.one_minus(p)))
    loss = ad.affine(ad.sum_reduce(ad.add(pos, neg)), -1.0, 0.0)
    if weighting:
        loss = ad.affine(loss, alpha, 0.0)
    return loss


def group_loss(pred: DTensor, pos: np.ndarray, neg: np.ndarray) -> DTensor:
    """同一输入上多条计划的加权 BCE 之和：−Σ_j [P_j log p_j + N_j log(1−p_j)]"""
    _check_width(pred, len(pos))
    p = ad.clip(pred, EPS, 1.0 - EPS)
    term = ad.add(
        ad.hadamard(ad.constant(pos.reshape(1, -1)), ad.log(p)),
        ad.hadamard(ad.constant(neg.reshape(1, -1)), ad.log(ad.one_minus(p))),
    )
    return ad.affine(ad.sum_reduce(term), -1.0, 0.0)


# ====================================================================== evaluation

@dataclass
class EvalResult:
    correct: int
    total: int
    predictions: List[str] = field(default_factory=list)

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0


def _predict_chunk(job: Tuple[ToolNet, object, List[EvalCase]]) -> List[str]:
    """工作进程入口：对一组用例做 argmax 预测"""
    model, provider, cases = job
    return [
        argmax_tool(model.predict(c.world, c.goal, provider, c.extra_tokens))
        for c in cases
    ]


def predict_cases(model: ToolNet, cases: Sequence[EvalCase], provider, workers: int = 1) -> List[str]:
    workers = max(1, workers)
    size = max(1, math.ceil(len(cases) / workers))
    chunks = [list(cases[i:i + size]) for i in range(0, len(cases), size)]
    results = WorkerPool(workers).map(_predict_chunk, [(model, provider, chunk) for chunk in chunks])
    return [token for chunk in results for token in chunk]


def evaluate(model: ToolNet, cases: Sequence[EvalCase], provider, workers: int = 1) -> EvalResult:
    """预测落在可接受集合中即为正确；每个用例按其计划条数计数"""
    if not cases:
        raise ContractError("evaluate needs at least one case")
    predictions = predict_cases(model, cases, provider, workers)
    correct = sum(c.count for c, p in zip(cases, predictions) if p in c.acceptable)
    total = sum(c.count for c in cases)
    return EvalResult(correct, total, predictions)


# ====================================================================== training

@dataclass
class PreparedGroup:
    inp: GraphInput
    pos: np.ndarray
    neg: np.ndarray


@dataclass
class TrainResult:
    model: ToolNet
    history: TrainingHistory


def prepare_groups(model: ToolNet, groups: Sequence[TrainingGroup], provider) -> List[PreparedGroup]:
    out = []
    for group in groups:
        inp = model.prepare(group.world, group.goal, provider)
        pos, neg = group.targets(inp.tokens)
        out.append(PreparedGroup(inp, pos, neg))
    return out


def make_optimizer(model: ToolNet, config: TrainConfig):
    if config.optimizer == "sgd":
        return ad.SGD(model.params, config.learning_rate)
    return ad.Adam(model.params, config.learning_rate, config.beta1, config.beta2, config.eps)


def train_epoch(model: ToolNet, prepared: Sequence[PreparedGroup], optimizer, rng: np.random.Generator,
                batch_size: int) -> float:
    """一轮训练，返回平均 loss"""
    order = rng.permutation(len(prepared))
    total = 0.0
    for start in range(0, len(order), batch_size):
        model.zero_grad()
        for index in order[start:start + batch_size]:
            item = prepared[int(index)]
            loss = group_loss(model.forward(item.inp), item.pos, item.neg)
            ad.backward(loss)
            total += loss.item()
        optimizer.step()
    return total / max(1, len(prepared))


def train(
    groups: Sequence[TrainingGroup],
    val_cases: Sequence[EvalCase],
    ablation: AblationConfig,
    config: TrainConfig,
    provider,
    tool_vocab: Sequence[str],
    domain: str = "",
) -> TrainResult:
    """训练至早停，返回验证准确率最好的参数与历史"""
    if not groups:
        raise ContractError("training needs at least one record")
    model = ToolNet(ablation, tool_vocab, seed=config.seed)
    prepared = prepare_groups(model, groups, provider)
    optimizer = make_optimizer(model, config)
    rng = np.random.default_rng(config.seed)

    epochs: List[EpochRecord] = []
    best_acc, best_epoch = -1.0, 0
    best_params: Dict[str, np.ndarray] = {}
    for epoch in range(1, config.epochs + 1):
        with performance_monitor.timer("train_epoch"):
            loss = train_epoch(model, prepared, optimizer, rng, config.batch_size)
        if not np.isfinite(loss):
            raise TrainingDivergence(epoch, loss)
        val_acc = evaluate(model, val_cases, provider).accuracy if val_cases else 0.0
        epochs.append(EpochRecord(epoch=epoch, loss=loss, val_accuracy=val_acc))
        logger.debug(f"[{ablation.label}/{domain}] epoch {epoch}: loss={loss:.4f} val={val_acc:.4f}")
        if val_acc > best_acc:
            best_acc, best_epoch = val_acc, epoch
            best_params = {name: p.data.copy() for name, p in model.params.items()}
        elif epoch - best_epoch >= config.patience:
            logger.info(f"[{ablation.label}/{domain}] 早停于第 {epoch} 轮")
            break

    for name, p in model.params.items():
        p.data = best_params[name].copy()
    model.zero_grad()
    log_info("训练完成", model=ablation.label, domain=domain, epochs=len(epochs),
             best_epoch=best_epoch, val=round(best_acc, 4))
    history = TrainingHistory(
        model=ablation.label,
        domain=domain,
        parameters=model.parameter_count(),
        epochs=epochs,
        best_epoch=best_epoch,
        best_val_accuracy=best_acc,
    )
    return TrainResult(model, history)


# ====================================================================== results table

def result_row(
    label: str,
    test: Dict[str, Optional[EvalResult]],
    gentest: Dict[str, Dict[str, EvalResult]],
) -> ResultRow:
    """test: domain -> 结果；gentest: domain -> type -> 结果（百分比）"""
    def pct(r: Optional[EvalResult]) -> Optional[float]:
        return None if r is None or r.total == 0 else 100.0 * r.accuracy

    values: Dict[str, object] = {"model": label}
    for domain in ("home", "factory"):
        values[f"test_{domain}"] = pct(test.get(domain))
        per_type = gentest.get(domain, {})
        if per_type:
            values[f"gentest_{domain}"] = pct(EvalResult(
                sum(r.correct for r in per_type.values()), sum(r.total for r in per_type.values())
            ))
    for gen_type in ("I", "II", "III", "IV", "V"):
        parts = [gentest[d][gen_type] for d in gentest if gen_type in gentest[d]]
        if parts:
            values[f"gentest_{gen_type}"] = pct(EvalResult(sum(r.correct for r in parts), sum(r.total for r in parts)))
    return ResultRow(**values)
