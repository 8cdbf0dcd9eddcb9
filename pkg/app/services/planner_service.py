"""
ToolNet Pipeline Planner Service
符号前向搜索（宽度优先 / 工具似然引导），有效分支因子与成对对比
"""

import heapq
import itertools
import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from app.core.background_tasks import WorkerPool
from app.core.cache_manager import CacheManager
from app.core.error_handler import ContractError
from app.core.logging_manager import log_info
from app.core.performance_monitor import performance_monitor
from app.models.toolnet import ToolDistribution, ToolNet
from app.models.world_models import GoalSpec, SymbolicAction, WorldGraph
from app.schemas.result_schemas import PlannerSummary, SearchRecord
from app.services.dataset_service import SceneCache, scene_cache
from app.services.teacher_service import witness_depth
from app.services.world_service import apply, candidate_actions, goals_for, satisfied, try_replay
from config.pipeline import PipelineConfig

logger = logging.getLogger(__name__)

MODES = ("uninformed", "guided")
GRID = 0.5
EPS = 1e-9
BISECTION_LIMIT = 200

StateKey = Tuple[FrozenSet, Tuple, Optional[str]]


# ====================================================================== state hashing

def _quantize(value: float) -> int:
    return int(round(value / GRID))


def state_key(w: WorldGraph) -> StateKey:
    """关系（不含 Near）+ 离散状态 + 0.5 m 网格位置 + 机器人所在目标"""
    edges = frozenset(e for e in w.edges if e.rel != "Near")
    nodes = tuple(sorted(
        (n.id, tuple(sorted(n.states)), tuple(_quantize(v) for v in n.pos))
        for n in w.nodes
    ))
    return edges, nodes, w.agent_at


# ====================================================================== branching factor

def _tree_size(b: float, depth: int, cap: float = math.inf) -> float:
    """Σ_{i=1..d} b^i，部分和超过 cap 即停止（避免大深度时溢出）"""
    total, term = 0.0, 1.0
    for _ in range(depth):
        term *= b
        total += term
        if total > cap:
            break
    return total


def effective_branching_factor(nodes_expanded: int, depth: int, tol: float = 1e-6) -> float:
    """求解 Σ_{i=1..d} b^i = N − 1（二分，区间 [1e-6, N]）"""
    if nodes_expanded < 1:
        raise ContractError(f"nodes expanded must be >= 1, got {nodes_expanded}")
    if depth == 0:
        if nodes_expanded != 1:
            raise ContractError(f"depth 0 requires exactly one node, got {nodes_expanded}")
        return 0.0
    if depth < 0:
        raise ContractError(f"depth must be >= 0, got {depth}")

    target = float(nodes_expanded - 1)
    lo, hi = 1e-6, float(max(nodes_expanded, 1))
    mid = (lo + hi) / 2
    for _ in range(BISECTION_LIMIT):
        mid = (lo + hi) / 2
        residual = _tree_size(mid, depth, cap=2.0 * target + 1.0) - target
        if hi - lo <= tol and abs(residual) <= tol:
            break
        if residual < 0:
            lo = mid
        else:
            hi = mid
    return mid


# ====================================================================== search

@dataclass
class SearchStats:
    """一次搜索的结果"""

    mode: str
    found: bool
    nodes_expanded: int
    wall_time: float
    plan: List[SymbolicAction] = field(default_factory=list)
    model_queries: int = 0

    @property
    def depth(self) -> Optional[int]:
        return len(self.plan) if self.found else None

    @property
    def branching_factor(self) -> Optional[float]:
        if not self.found:
            return None
        return effective_branching_factor(self.nodes_expanded, len(self.plan))

    def to_record(self, domain: str, goal_id: int, scene_seed: int) -> SearchRecord:
        return SearchRecord(
            domain=domain,
            goal_id=goal_id,
            scene_seed=scene_seed,
            mode=self.mode,
            found=self.found,
            nodes_expanded=self.nodes_expanded,
            depth=self.depth,
            branching_factor=self.branching_factor,
            wall_time=self.wall_time,
            plan=[str(a) for a in self.plan],
            model_queries=self.model_queries,
        )


class ToolPriority:
    """把模型的工具似然转成动作优先级；按状态键缓存查询"""

    def __init__(self, model: ToolNet, goal: GoalSpec, provider, neutral: float = 0.5):
        self.model = model
        self.goal = goal
        self.provider = provider
        self.neutral = neutral
        self.cache = CacheManager()
        self.queries = 0

    def query(self, w: WorldGraph) -> ToolDistribution:
        def run() -> ToolDistribution:
            self.queries += 1
            return self.model.predict(w, self.goal, self.provider)
        return self.cache.get_or_set(state_key(w), run)

    def priority(self, action: SymbolicAction, w: WorldGraph, dist: ToolDistribution) -> float:
        node = w.node(action.target)
        if node.is_tool:
            likelihoods = dist.as_dict()
            if node.token in likelihoods:
                return likelihoods[node.token]
        return self.neutral

    def cost(self, action: SymbolicAction, w: WorldGraph, dist: ToolDistribution) -> float:
        return -math.log(max(self.priority(action, w, dist), EPS))

    @staticmethod
    def acquires_tool(action: SymbolicAction, before: WorldGraph) -> bool:
        return action.name == "Pick" and before.node(action.target).is_tool


def _found(mode: str, nodes: int, started: float, plan: List[SymbolicAction], queries: int = 0) -> SearchStats:
    return SearchStats(mode, True, nodes, time.perf_counter() - started, plan, queries)


def _uninformed(w: WorldGraph, goal: GoalSpec, budget: int, started: float) -> SearchStats:
    frontier = deque([(w, [])])
    seen = {state_key(w)}
    while frontier:
        state, plan = frontier.popleft()
        for action in candidate_actions(state):
            child = apply(action, state)
            key = state_key(child)
            if key in seen:
                continue
            seen.add(key)
            if satisfied(goal, child):
                return _found("uninformed", len(seen), started, plan + [action])
            if len(seen) >= budget:
                return SearchStats("uninformed", False, len(seen), time.perf_counter() - started)
            frontier.append((child, plan + [action]))
    return SearchStats("uninformed", False, len(seen), time.perf_counter() - started)


def _guided(w: WorldGraph, goal: GoalSpec, budget: int, priority: ToolPriority, started: float) -> SearchStats:
    counter = itertools.count()
    root_dist = priority.query(w)
    frontier = [(0.0, next(counter), w, [], root_dist)]
    seen = {state_key(w)}
    while frontier:
        cost, _, state, plan, dist = heapq.heappop(frontier)
        for action in candidate_actions(state):
            child = apply(action, state)
            key = state_key(child)
            if key in seen:
                continue
            seen.add(key)
            if satisfied(goal, child):
                return _found("guided", len(seen), started, plan + [action], priority.queries)
            if len(seen) >= budget:
                return SearchStats("guided", False, len(seen), time.perf_counter() - started,
                                   model_queries=priority.queries)
            child_dist = priority.query(child) if priority.acquires_tool(action, state) else dist
            step = priority.cost(action, state, dist)
            heapq.heappush(frontier, (cost + step, next(counter), child, plan + [action], child_dist))
    return SearchStats("guided", False, len(seen), time.perf_counter() - started, model_queries=priority.queries)


def search(
    w: WorldGraph,
    goal: GoalSpec,
    mode: str,
    budget: int,
    model: Optional[ToolNet] = None,
    provider=None,
    neutral: float = 0.5,
) -> SearchStats:
    """前向搜索；预算耗尽时返回 found=False"""
    if budget <= 0:
        raise ContractError(f"search budget must be positive, got {budget}")
    if mode not in MODES:
        raise ContractError(f"unknown search mode: {mode}")
    if mode == "guided" and (model is None or provider is None):
        raise ContractError("guided search needs a model and an embedding provider")

    w = w.with_goal(goal)
    started = time.perf_counter()
    if satisfied(goal, w):
        return _found(mode, 1, started, [])
    with performance_monitor.timer(f"search_{mode}"):
        if mode == "uninformed":
            stats = _uninformed(w, goal, budget, started)
        else:
            priority = ToolPriority(model, goal, provider, neutral)
            stats = _guided(w, goal, budget, priority, started)
            logger.debug(f"[guided] goal {goal.goal_id} query cache: {priority.cache.get_stats()}")

    if stats.found:
        final = try_replay(stats.plan, w)
        if final is None or not satisfied(goal, final):
            raise ContractError(f"{mode} search returned a plan that does not reach goal {goal.goal_id}")
    logger.debug(f"[{mode}] goal {goal.goal_id}: found={stats.found} nodes={stats.nodes_expanded}")
    return stats


# ====================================================================== paired comparison

@dataclass(frozen=True)
class SearchPair:
    domain: str
    goal_id: int
    scene_seed: int
    depth: int


def select_pairs(config: PipelineConfig, domain: str, scenes: SceneCache = scene_cache) -> List[SearchPair]:
    """按顺序取见证深度在 [1, max_depth] 内的前 N 个 (goal, scene)，留出场景优先"""
    holdout = config.holdout_seed()
    seeds = [holdout] + [s for s in config.scene_seeds() if s != holdout]
    pairs: List[SearchPair] = []
    for seed in seeds:
        w = scenes.get(domain, seed)
        for goal in goals_for(domain):
            depth = witness_depth(goal, w.with_goal(goal))
            if depth is not None and 1 <= depth <= config.planner_max_depth:
                pairs.append(SearchPair(domain, goal.goal_id, seed, depth))
            if len(pairs) >= config.planner_pairs:
                return pairs
    if len(pairs) < config.planner_pairs:
        logger.warning(f"{domain} 只有 {len(pairs)} 个满足深度限制的 (goal, scene) 对")
    return pairs


@dataclass(frozen=True)
class SearchTask:
    pair: SearchPair
    mode: str
    budget: int
    neutral: float
    world: WorldGraph
    goal: GoalSpec
    model: Optional[ToolNet] = None
    provider: object = None


def _run_search_task(task: SearchTask) -> SearchRecord:
    """工作进程入口"""
    stats = search(task.world, task.goal, task.mode, task.budget, task.model, task.provider, task.neutral)
    return stats.to_record(task.pair.domain, task.pair.goal_id, task.pair.scene_seed)


def compare(
    pairs: Sequence[SearchPair],
    config: PipelineConfig,
    model: ToolNet,
    provider,
    workers: int = 1,
    scenes: SceneCache = scene_cache,
) -> List[SearchRecord]:
    """每个对分别跑两种模式"""
    goals = {(p.domain, g.goal_id): g for p in pairs for g in goals_for(p.domain)}
    tasks = []
    for pair in pairs:
        w = scenes.get(pair.domain, pair.scene_seed)
        goal = goals[(pair.domain, pair.goal_id)]
        for mode in MODES:
            guided = mode == "guided"
            tasks.append(SearchTask(
                pair, mode, config.planner_budget, config.planner_neutral_priority, w, goal,
                model if guided else None, provider if guided else None,
            ))
    records = WorkerPool(workers).map(
        _run_search_task, tasks, sort_key=lambda r: (r.domain, r.scene_seed, r.goal_id, MODES.index(r.mode))
    )
    for record in records:
        log_info("规划搜索", domain=record.domain, goal=record.goal_id, scene=record.scene_seed,
                 mode=record.mode, nodes=record.nodes_expanded, ebf=record.branching_factor)
    return records


def _mean_std(values: List[float]) -> Tuple[Optional[float], Optional[float]]:
    if not values:
        return None, None
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def summarize(domain: str, records: Sequence[SearchRecord], ratio: float = 0.5) -> PlannerSummary:
    """b* 均值±标准差；引导搜索节点数 ≤ ratio × 无信息搜索的对计为剪枝成功"""
    by_mode: Dict[str, List[SearchRecord]] = {m: [r for r in records if r.mode == m] for m in MODES}
    found, ebf_mean, ebf_std, nodes_mean = {}, {}, {}, {}
    for mode, rows in by_mode.items():
        found[mode] = sum(1 for r in rows if r.found)
        ebf_mean[mode], ebf_std[mode] = _mean_std([r.branching_factor for r in rows if r.branching_factor is not None])
        nodes_mean[mode] = float(np.mean([r.nodes_expanded for r in rows])) if rows else 0.0

    uninformed = {(r.goal_id, r.scene_seed): r for r in by_mode["uninformed"]}
    pairs = 0
    pruned = 0
    for r in by_mode["guided"]:
        base = uninformed.get((r.goal_id, r.scene_seed))
        if base is None:
            continue
        pairs += 1
        if r.found and base.found and r.nodes_expanded <= ratio * base.nodes_expanded:
            pruned += 1
    return PlannerSummary(
        domain=domain,
        pairs=pairs,
        found=found,
        ebf_mean=ebf_mean,
        ebf_std=ebf_std,
        nodes_mean=nodes_mean,
        pruned_pairs=pruned,
        pruned_fraction=pruned / pairs if pairs else 0.0,
    )
