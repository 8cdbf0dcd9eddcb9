"""
ToolNet Pipeline Dataset Service
演示语料：示教生成、数据划分、两种增强、标签与权重、统计报告
"""

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from app.core.background_tasks import WorkerPool
from app.core.constants import NO_TOOL, DomainConstants, WorldConstants
from app.core.error_handler import TeachingFailure
from app.core.logging_manager import log_info, log_warning
from app.models.world_models import GoalSpec, SymbolicAction, WorldGraph
from app.schemas.corpus_schemas import (
    DemoPlan,
    GoalStatistics,
    PairKey,
    PlanSource,
    Split,
    StrategyCount,
)
from app.services.teacher_service import teach_many, tools_used
from app.services.world_service import (
    goal_by_id,
    goals_for,
    make_scene,
    plan_cost,
    remove_objects,
    satisfied,
    try_replay,
)
from config.pipeline import PipelineConfig

logger = logging.getLogger(__name__)

MAX_REMOVED = 5


# ====================================================================== scenes

class SceneCache:
    """(domain, seed, removed) -> WorldGraph，按需生成"""

    def __init__(self):
        self._scenes: Dict[Tuple[str, int, Tuple[str, ...]], WorldGraph] = {}

    def get(self, domain: str, seed: int, removed: Sequence[str] = ()) -> WorldGraph:
        key = (domain, seed, tuple(sorted(removed)))
        scene = self._scenes.get(key)
        if scene is None:
            if key[2]:
                scene = remove_objects(self.get(domain, seed), key[2])
            else:
                scene = make_scene(domain, seed)
            self._scenes[key] = scene
        return scene

    def for_plan(self, plan: DemoPlan) -> WorldGraph:
        return self.get(plan.domain, plan.scene_seed, plan.removed)

    def clear(self) -> None:
        self._scenes.clear()


# 全局场景缓存
scene_cache = SceneCache()


def goal_for(plan: DemoPlan) -> GoalSpec:
    return goal_by_id(plan.domain, plan.goal_id)


def replays_to_goal(plan: DemoPlan, scenes: SceneCache = scene_cache) -> bool:
    """从初始场景重放计划并检查目标"""
    final = try_replay(plan.parsed_actions(), scenes.for_plan(plan))
    return final is not None and satisfied(goal_for(plan), final)


# ====================================================================== generation

@dataclass(frozen=True)
class TeachTask:
    domain: str
    goal_id: int
    scene_seed: int
    style_seeds: Tuple[int, ...]


@dataclass
class TeachResult:
    task: TeachTask
    plans: List[DemoPlan] = field(default_factory=list)
    failure: str = ""


def _run_teach_task(task: TeachTask) -> TeachResult:
    """工作进程入口（模块级函数，可序列化）"""
    goal = goal_by_id(task.domain, task.goal_id)
    scene = scene_cache.get(task.domain, task.scene_seed)
    try:
        return TeachResult(task, teach_many(goal, scene, task.style_seeds))
    except TeachingFailure as e:
        return TeachResult(task, [], str(e))


def teach_tasks(config: PipelineConfig, domain: str) -> List[TeachTask]:
    style_seeds = tuple(config.teacher_seed + k for k in range(config.teacher_seeds))
    return [
        TeachTask(domain, goal.goal_id, seed, style_seeds)
        for goal in goals_for(domain)
        for seed in config.scene_seeds()
    ]


def generate_corpus(config: PipelineConfig, domain: str, workers: int = 1) -> Tuple[List[DemoPlan], List[str]]:
    """每个 (goal, scene) 的示教计划，按 sort_key 合并；返回 (plans, failures)"""
    results = WorkerPool(workers).map(
        _run_teach_task,
        teach_tasks(config, domain),
        sort_key=lambda r: (r.task.goal_id, r.task.scene_seed),
    )
    plans: List[DemoPlan] = []
    failures: List[str] = []
    for result in results:
        if result.failure:
            log_warning("示教失败", domain=domain, goal=result.task.goal_id,
                        scene=result.task.scene_seed, error=result.failure)
            failures.append(result.failure)
        plans.extend(result.plans)
    plans = assign_splits(mark_optimal(plans), config.holdout_seed())
    log_info("示教语料生成完成", domain=domain, plans=len(plans), failures=len(failures))
    return plans, failures


# ====================================================================== split / optimal

def assign_splits(plans: Iterable[DemoPlan], holdout_seed: int) -> List[DemoPlan]:
    """留出场景之外为训练集；留出场景的每个 pair 内交替分到 val / test"""
    out: List[DemoPlan] = []
    counters: Dict[PairKey, int] = defaultdict(int)
    for plan in sorted(plans, key=lambda p: p.sort_key()):
        if plan.scene_seed != holdout_seed:
            split = Split.TRAIN
        else:
            index = counters[plan.pair_key]
            counters[plan.pair_key] += 1
            split = Split.VAL if index % 2 == 0 else Split.TEST
        out.append(plan.model_copy(update={"split": split.value}))
    return out


def mark_optimal(plans: Iterable[DemoPlan]) -> List[DemoPlan]:
    """每个 pair 中代价最小的计划标记为最优（并列共享）"""
    plans = list(plans)
    best: Dict[PairKey, float] = {}
    for plan in plans:
        best[plan.pair_key] = min(best.get(plan.pair_key, float("inf")), plan.sim_cost)
    return [
        plan.model_copy(update={"optimal": plan.sim_cost <= best[plan.pair_key] + 1e-9})
        for plan in plans
    ]


def split_of(plans: Iterable[DemoPlan], split: Split) -> List[DemoPlan]:
    return [p for p in plans if p.split == split.value]


def split_sizes(plans: Iterable[DemoPlan]) -> Dict[str, int]:
    counts = Counter(p.split for p in plans)
    return {s.value: counts.get(s.value, 0) for s in Split}


# ====================================================================== augmentation

def _derived_plan(plan: DemoPlan, w: WorldGraph, source: PlanSource, provenance: str) -> DemoPlan:
    goal = goal_for(plan)
    actions = plan.parsed_actions()
    return DemoPlan(
        domain=plan.domain,
        goal_id=plan.goal_id,
        scene_seed=w.seed,
        removed=list(w.removed),
        style_seed=plan.style_seed,
        actions=plan.actions,
        tools_used=sorted(tools_used(actions, w, goal)),
        sim_cost=plan_cost(actions, w),
        source=source,
        provenance=provenance,
        split=Split.TRAIN,
    )


def augment_cross_scene(
    plans: Sequence[DemoPlan],
    scene_seeds: Sequence[int],
    max_targets: Optional[int] = None,
    scenes: SceneCache = scene_cache,
) -> Tuple[List[DemoPlan], StrategyCount]:
    """把训练计划在其他训练场景上重放，达成目标者加入语料"""
    count = StrategyCount()
    existing = {(p.pair_key, tuple(p.actions)) for p in plans}
    added: List[DemoPlan] = []
    sources = [p for p in split_of(plans, Split.TRAIN) if p.source == PlanSource.TEACHER.value]
    for plan in sources:
        goal = goal_for(plan)
        actions = plan.parsed_actions()
        targets = [s for s in sorted(scene_seeds) if s != plan.scene_seed]
        if max_targets is not None:
            targets = targets[:max_targets]
        for seed in targets:
            count.attempted += 1
            w = scenes.get(plan.domain, seed)
            final = try_replay(actions, w)
            if final is None or not satisfied(goal, final):
                continue
            provenance = f"replay:{plan.scene_seed}/{plan.style_seed}"
            derived = _derived_plan(plan, w, PlanSource.CROSS_SCENE, provenance)
            if (derived.pair_key, tuple(derived.actions)) in existing:
                count.duplicates += 1
            count.accepted += 1
            added.append(derived)
    logger.info(f"跨场景重放: 尝试 {count.attempted}, 接受 {count.accepted}")
    return added, count


def removal_candidates(w: WorldGraph, goal: GoalSpec, actions: Sequence[SymbolicAction]) -> List[str]:
    """可删除物体：可移动的叶子物体，既不在目标中提及，也不出现在任何动作参数里"""
    touched = {object_id for a in actions for object_id in a.args}
    out = []
    for n in w.nodes:
        if n.id == WorldConstants.AGENT_ID or n.token in WorldConstants.EXTENDED_TOKENS:
            continue
        if not n.has("is-movable") or w.children(n.id):
            continue
        if goal.mentions(n) or n.id in touched:
            continue
        out.append(n.id)
    return sorted(out)


def augment_object_removal(
    plans: Sequence[DemoPlan],
    removal_seed: int,
    variants: int = 1,
    scenes: SceneCache = scene_cache,
) -> Tuple[List[DemoPlan], StrategyCount]:
    """随机删除至多 5 个无关物体，重放仍达成目标者加入语料"""
    count = StrategyCount()
    added: List[DemoPlan] = []
    seen = set()
    sources = [p for p in split_of(plans, Split.TRAIN) if p.source == PlanSource.TEACHER.value]
    for index, plan in enumerate(sorted(sources, key=lambda p: p.sort_key())):
        goal = goal_for(plan)
        actions = plan.parsed_actions()
        w = scenes.for_plan(plan)
        candidates = removal_candidates(w, goal, actions)
        if not candidates:
            continue
        domain_index = DomainConstants.DOMAINS.index(plan.domain)
        for variant in range(variants):
            rng = np.random.default_rng([removal_seed, domain_index, index, variant])
            k = int(rng.integers(1, min(MAX_REMOVED, len(candidates)) + 1))
            chosen = sorted(str(c) for c in rng.choice(candidates, size=k, replace=False))
            count.attempted += 1
            reduced = scenes.get(plan.domain, plan.scene_seed, tuple(sorted(set(plan.removed) | set(chosen))))
            final = try_replay(actions, reduced)
            if final is None or not satisfied(goal, final):
                continue
            derived = _derived_plan(plan, reduced, PlanSource.REMOVAL, f"removal:{index}/{variant}")
            key = (derived.pair_key, tuple(derived.actions), derived.style_seed)
            if key in seen:
                count.duplicates += 1
                continue
            seen.add(key)
            count.accepted += 1
            added.append(derived)
    logger.info(f"物体删除增强: 尝试 {count.attempted}, 接受 {count.accepted}")
    return added, count


def augment_corpus(
    plans: Sequence[DemoPlan], config: PipelineConfig, scenes: SceneCache = scene_cache,
) -> Tuple[List[DemoPlan], StrategyCount, StrategyCount]:
    """两种增强 + 重新标记最优计划"""
    train_seeds = [s for s in config.scene_seeds() if s != config.holdout_seed()]
    cross, cross_count = augment_cross_scene(plans, train_seeds, config.aug_cross_scene_max, scenes)
    removal, removal_count = augment_object_removal(plans, config.removal_seed, config.aug_removal_variants, scenes)
    merged = mark_optimal(list(plans) + cross + removal)
    return sorted(merged, key=lambda p: p.sort_key()), cross_count, removal_count


# ====================================================================== labels / weights

def answer_tokens(plan: DemoPlan) -> FrozenSet[str]:
    return frozenset(plan.tools_used) if plan.tools_used else frozenset({NO_TOOL})


def label_vector(plan: DemoPlan, tokens: Sequence[str]) -> np.ndarray:
    """τ̂ 上的 0/1 标签；no-tool 位为 1 当且仅当未使用工具"""
    answers = answer_tokens(plan)
    return np.array([1.0 if t in answers else 0.0 for t in tokens])


def plan_weight(plan: DemoPlan, w_opt: float, weighting: bool) -> float:
    return w_opt if (weighting and plan.optimal) else 1.0


@dataclass
class TrainingGroup:
    """同一输入 (goal, scene) 的全部训练计划"""

    key: PairKey
    goal: GoalSpec
    world: WorldGraph
    answers: List[FrozenSet[str]]
    weights: List[float]

    def targets(self, tokens: Sequence[str]) -> Tuple[np.ndarray, np.ndarray]:
        """加权的正/负标签计数 Σα·y 与 Σα·(1−y)"""
        pos = np.zeros(len(tokens))
        neg = np.zeros(len(tokens))
        for answers, alpha in zip(self.answers, self.weights):
            y = np.array([1.0 if t in answers else 0.0 for t in tokens])
            pos += alpha * y
            neg += alpha * (1.0 - y)
        return pos, neg


def label_and_weight(
    plans: Iterable[DemoPlan],
    w_opt: float,
    weighting: bool,
    scenes: SceneCache = scene_cache,
) -> List[TrainingGroup]:
    """按 pair 聚合训练记录（组内 loss 之和等于逐计划加权 loss 之和）"""
    grouped: Dict[PairKey, TrainingGroup] = {}
    for plan in sorted(plans, key=lambda p: p.sort_key()):
        group = grouped.get(plan.pair_key)
        if group is None:
            group = TrainingGroup(plan.pair_key, goal_for(plan), scenes.for_plan(plan), [], [])
            grouped[plan.pair_key] = group
        group.answers.append(answer_tokens(plan))
        group.weights.append(plan_weight(plan, w_opt, weighting))
    return [grouped[k] for k in sorted(grouped)]


@dataclass
class EvalCase:
    """一次评估输入：可接受答案为该 pair 所有计划用到的工具"""

    key: PairKey
    goal: GoalSpec
    world: WorldGraph
    acceptable: FrozenSet[str]
    count: int = 1
    extra_tokens: Tuple[str, ...] = ()
    label: str = ""


def eval_cases(plans: Iterable[DemoPlan], scenes: SceneCache = scene_cache) -> List[EvalCase]:
    """按 pair 聚合；count 为计划条数，使准确率按计划计数"""
    grouped: Dict[PairKey, EvalCase] = {}
    for plan in sorted(plans, key=lambda p: p.sort_key()):
        case = grouped.get(plan.pair_key)
        if case is None:
            case = EvalCase(plan.pair_key, goal_for(plan), scenes.for_plan(plan), frozenset(), 0)
            grouped[plan.pair_key] = case
        case.acceptable = case.acceptable | answer_tokens(plan)
        case.count += 1
    return [grouped[k] for k in sorted(grouped)]


def tool_vocab(domain: str) -> Tuple[str, ...]:
    """固定输出头的词表：领域工具表"""
    return tuple(sorted(DomainConstants.TOOLS[domain]))


# ====================================================================== statistics

def _mean_std(values: Sequence[float]) -> Tuple[float, float]:
    if not values:
        return 0.0, 0.0
    arr = np.asarray(values, dtype=float)
    return round(float(arr.mean()), 4), round(float(arr.std()), 4)


def tool_histogram(plans: Iterable[DemoPlan], top: Optional[int] = 10) -> Dict[str, int]:
    counts = Counter()
    for plan in plans:
        counts.update(answer_tokens(plan))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return dict(ranked[:top] if top else ranked)


def goal_statistics(plans: Sequence[DemoPlan], domain: str) -> List[GoalStatistics]:
    """每个目标的动作数、交互物体数、工具数与代价统计"""
    out = []
    for goal in goals_for(domain):
        members = [p for p in plans if p.domain == domain and p.goal_id == goal.goal_id]
        actions = [len(p.actions) for p in members]
        interacted = [len({a.target for a in p.parsed_actions()}) for p in members]
        tools = [len(p.tools_used) for p in members]
        costs = [p.sim_cost for p in members]
        a_mean, a_std = _mean_std(actions)
        i_mean, i_std = _mean_std(interacted)
        t_mean, t_std = _mean_std(tools)
        c_mean, c_std = _mean_std(costs)
        out.append(GoalStatistics(
            goal_id=goal.goal_id, text=goal.text, plans=len(members),
            actions_mean=a_mean, actions_std=a_std,
            interacted_mean=i_mean, interacted_std=i_std,
            tools_mean=t_mean, tools_std=t_std,
            cost_mean=c_mean, cost_std=c_std,
            tool_histogram=tool_histogram(members),
        ))
    return out


def diversity(plans: Sequence[DemoPlan], domain: str) -> float:
    """至少用到两种不同工具的目标所占比例"""
    goals = goals_for(domain)
    multi = 0
    for goal in goals:
        tools = {t for p in plans if p.domain == domain and p.goal_id == goal.goal_id for t in p.tools_used}
        if len(tools) >= 2:
            multi += 1
    return round(multi / len(goals), 4)
