"""
ToolNet Pipeline GenTest Service
泛化测试：五类场景变换（位置、删除、替代工具、无关物体、目标物体替换）及计分
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from app.core.background_tasks import WorkerPool
from app.core.constants import NO_TOOL, DomainConstants, GenTestConstants, WorldConstants
from app.core.error_handler import ContractError
from app.core.logging_manager import log_info
from app.models.toolnet import ToolNet
from app.models.world_models import GoalSpec, ObjectNode, WorldGraph
from app.schemas.corpus_schemas import DemoPlan, Split
from app.schemas.gentest_schemas import (
    GenBase,
    GenCaseDocument,
    GenTestSummary,
    GenTypeScore,
)
from app.schemas.world_schemas import GoalDocument, SceneDocument
from app.services.dataset_service import EvalCase, SceneCache, answer_tokens, scene_cache, split_of
from app.services.embedding_service import EmbeddingProvider, nearest
from app.services.teacher_service import reachable_answers, routine_for
from app.services.trainer_service import EvalResult, predict_cases
from app.services.world_service import (
    goals_for,
    make_node,
    place_object,
    remove_objects,
    satisfied,
    substitute_object,
)

logger = logging.getLogger(__name__)

AGENT = WorldConstants.AGENT_ID
FLOOR = WorldConstants.FLOOR_ID
STRICT = "strict"


@dataclass
class GenCase:
    """一个泛化测试用例"""

    domain: str
    type: str
    base: Tuple[int, int]
    goal: GoalSpec
    world: WorldGraph
    mutation: Dict[str, object]
    acceptable: FrozenSet[str]
    variant: str = ""

    def to_document(self) -> GenCaseDocument:
        return GenCaseDocument(
            domain=self.domain,
            type=self.type,
            variant=self.variant,
            base=GenBase(goal_id=self.base[0], scene_seed=self.base[1]),
            goal=GoalDocument.model_validate(self.goal.to_dict()),
            mutation=self.mutation,
            acceptable=sorted(self.acceptable),
            scene=SceneDocument.model_validate(self.world.to_dict()),
        )

    @classmethod
    def from_document(cls, doc: GenCaseDocument) -> "GenCase":
        return cls(
            domain=doc.domain,
            type=doc.type,
            base=(doc.base.goal_id, doc.base.scene_seed),
            goal=GoalSpec.from_dict(doc.goal.model_dump()),
            world=WorldGraph.from_dict(doc.scene.model_dump(by_alias=True)),
            mutation=dict(doc.mutation),
            acceptable=frozenset(doc.acceptable),
            variant=doc.variant,
        )

    def to_eval_case(self) -> EvalCase:
        return EvalCase(
            key=(self.domain, self.base[0], self.base[1], ()),
            goal=self.goal,
            world=self.world,
            acceptable=self.acceptable,
            count=1,
            label=f"{self.type}{'/' + self.variant if self.variant else ''}",
        )


@dataclass
class TrainingKnowledge:
    """训练集中可见的信息：场景中出现过的词、每个目标演示过的工具"""

    scene_tokens: FrozenSet[str]
    demonstrated: Dict[int, FrozenSet[str]]
    histogram: Dict[int, Counter] = field(default_factory=dict)

    def ranked_tools(self, goal_id: int) -> List[str]:
        """按演示频次降序，同频按字典序"""
        counts = self.histogram.get(goal_id, Counter())
        return [t for t, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))]

    def most_frequent(self, goal_id: int) -> Optional[str]:
        ranked = self.ranked_tools(goal_id)
        return ranked[0] if ranked else None


def training_knowledge(plans: Iterable[DemoPlan], domain: str, scenes: SceneCache = scene_cache) -> TrainingKnowledge:
    train = [p for p in split_of(plans, Split.TRAIN) if p.domain == domain]
    tokens: Set[str] = set()
    for seed in sorted({p.scene_seed for p in train}):
        tokens |= scenes.get(domain, seed).tokens()
    demonstrated: Dict[int, Set[str]] = {}
    histogram: Dict[int, Counter] = {}
    for plan in train:
        demonstrated.setdefault(plan.goal_id, set()).update(answer_tokens(plan))
        histogram.setdefault(plan.goal_id, Counter()).update(plan.tools_used)
    return TrainingKnowledge(
        scene_tokens=frozenset(tokens),
        demonstrated={k: frozenset(v) for k, v in demonstrated.items()},
        histogram=histogram,
    )


# ====================================================================== scene edits

def _rng(seed: int, domain: str, goal_id: int, scene_seed: int, gen_type: str) -> np.random.Generator:
    return np.random.default_rng([
        seed, DomainConstants.DOMAINS.index(domain), goal_id, scene_seed, GenTestConstants.TYPES.index(gen_type),
    ])


def _tool_nodes(w: WorldGraph, token: str) -> List[str]:
    return sorted(n.id for n in w.nodes if n.token == token and n.is_tool and n.has("is-movable"))


def _rehome_children(w: WorldGraph, object_id: str) -> WorldGraph:
    """删除物体前把其承载的物体放到它的宿主上"""
    parent = w.parent(object_id)
    host, rel = (parent.dst, parent.rel) if parent is not None else (FLOOR, "OnTop")
    for child in w.children(object_id):
        w = place_object(w, child, rel, host, w.node(child).pos[:2])
    return w


def remove_tools(w: WorldGraph, object_ids: Iterable[str]) -> WorldGraph:
    for object_id in sorted(object_ids):
        w = _rehome_children(w, object_id)
    return remove_objects(w, object_ids)


def replace_objects(w: WorldGraph, old_ids: Sequence[str], new_token: str,
                    build: Callable[[ObjectNode, str], ObjectNode]) -> WorldGraph:
    """把一组物体替换为新词的物体，id 为 new 或 new#k"""
    old_ids = sorted(old_ids)
    for index, old_id in enumerate(old_ids):
        new_id = new_token if len(old_ids) == 1 else f"{new_token}#{index}"
        if w.has_node(new_id):
            raise ContractError(f"object id already present: {new_id}")
        w = substitute_object(w, old_id, build(w.node(old_id), new_id))
    return w


def inherit_node(new_token: str) -> Callable[[ObjectNode, str], ObjectNode]:
    """替代工具：继承旧物体的尺寸、标志、功能与容量"""
    return lambda old, new_id: old.replace(id=new_id, token=new_token)


def plain_node(new_token: str) -> Callable[[ObjectNode, str], ObjectNode]:
    """无关物体：只保留可移动属性与原尺寸"""
    return lambda old, new_id: old.replace(
        id=new_id, token=new_token, flags=frozenset({"is-movable"}), functions=frozenset(),
        capacity=None, climb_height=0.0, categories=(),
    )


def spec_node(new_token: str, domain: str) -> Callable[[ObjectNode, str], ObjectNode]:
    """新的目标物体：按类别规格构造"""
    return lambda old, new_id: make_node(new_id, new_token, old.pos, domain, states=old.states & {"inside"})


def _differs(base: WorldGraph, mutated: WorldGraph) -> bool:
    return base.nodes != mutated.nodes or base.edges != mutated.edges


def _subject_centre(goal: GoalSpec, w: WorldGraph) -> np.ndarray:
    subjects = w.find(goal.constraints[0].subject)
    if not subjects:
        return np.array(w.agent.pos[:2])
    return np.mean([w.node(s).pos[:2] for s in subjects], axis=0)


def _planar_to(w: WorldGraph, object_id: str, centre: np.ndarray) -> float:
    return round(float(np.linalg.norm(np.array(w.node(object_id).pos[:2]) - centre)), 6)


# ====================================================================== generator

class GenTestGenerator:
    """从 (goal, scene) 基础对生成五类泛化用例"""

    def __init__(self, domain: str, knowledge: TrainingKnowledge, kb: EmbeddingProvider, seed: int,
                 scenes: SceneCache = scene_cache):
        self.domain = domain
        self.knowledge = knowledge
        self.kb = kb
        self.seed = seed
        self.scenes = scenes
        self.skipped: Counter = Counter()

    # ------------------------------------------------------------ helpers

    def _case(self, gen_type: str, goal: GoalSpec, base: WorldGraph, mutated: WorldGraph,
              mutation: Dict[str, object], acceptable: Iterable[str], variant: str = "") -> Optional[GenCase]:
        acceptable = frozenset(acceptable)
        if not acceptable or not _differs(base, mutated) or satisfied(goal, mutated):
            self.skipped[gen_type] += 1
            return None
        mutated.validate()
        return GenCase(self.domain, gen_type, (goal.goal_id, base.seed), goal,
                       mutated.with_goal(goal), mutation, acceptable, variant)

    def _demonstrated(self, goal: GoalSpec) -> FrozenSet[str]:
        return self.knowledge.demonstrated.get(goal.goal_id, frozenset())

    def _present_tool(self, goal: GoalSpec, w: WorldGraph) -> Optional[str]:
        """该目标演示最多、且出现在场景中的工具"""
        for token in self.knowledge.ranked_tools(goal.goal_id):
            if _tool_nodes(w, token):
                return token
        return None

    def bases(self, scene_seeds: Sequence[int]) -> List[Tuple[GoalSpec, WorldGraph]]:
        return [(goal, self.scenes.get(self.domain, seed)) for goal in goals_for(self.domain) for seed in scene_seeds]

    # ------------------------------------------------------------ type I

    def type_i(self, goal: GoalSpec, w: WorldGraph) -> List[GenCase]:
        cases = [self._carrier_swap(goal, w), self._relocate_subject(goal, w)]
        return [c for c in cases if c is not None]

    def _carrier_swap(self, goal: GoalSpec, w: WorldGraph) -> Optional[GenCase]:
        if routine_for(goal) != "transport":
            return None
        c = goal.constraints[0]
        subjects = [w.node(s) for s in w.find(c.subject)]
        centre = _subject_centre(goal, w)
        carriers = sorted(
            (n.id for n in w.nodes
             if n.is_tool and n.does("carrier") and not n.matches(c.target)
             and all(s.fits_in(n) for s in subjects) and not w.children(n.id)),
            key=lambda i: (_planar_to(w, i, centre), i),
        )
        if len(carriers) < 2:
            return None
        near_id, far_id = carriers[0], carriers[1]
        if w.node(near_id).token == w.node(far_id).token:
            return None
        pn, pf = w.parent(near_id), w.parent(far_id)
        if pn is None or pf is None:
            return None
        mutated = place_object(w, near_id, pf.rel, pf.dst, w.node(far_id).pos[:2])
        mutated = place_object(mutated, far_id, pn.rel, pn.dst, w.node(near_id).pos[:2])
        nearer = min((near_id, far_id), key=lambda i: (_planar_to(mutated, i, centre), i))
        acceptable = {mutated.node(nearer).token} & reachable_answers(goal, mutated)
        mutation = {"variant": "carrier-swap", "swapped": [near_id, far_id]}
        return self._case("I", goal, w, mutated, mutation, acceptable, "carrier-swap")

    def _relocate_subject(self, goal: GoalSpec, w: WorldGraph) -> Optional[GenCase]:
        c = goal.constraints[0]
        subjects = sorted(s for s in w.find(c.subject) if w.node(s).has("is-movable"))
        if not subjects:
            return None
        subject = subjects[0]
        parent = w.parent(subject)
        placements = DomainConstants.PLACEMENTS[self.domain].get(w.node(subject).token, [("floor",)])
        current = (parent.rel, parent.dst) if parent is not None and parent.dst != FLOOR else ("floor",)
        options = [p for p in placements if tuple(p) != current and (p[0] == "floor" or w.has_node(p[1]))]
        if current != ("floor",) and ("floor",) not in options:
            options.append(("floor",))
        if not options:
            return None
        rng = _rng(self.seed, self.domain, goal.goal_id, w.seed, "I")
        choice = options[int(rng.integers(len(options)))]
        if choice[0] == "floor":
            xy = tuple(round(float(v), 1) for v in rng.uniform(1.0, 9.0, size=2))
            mutated = place_object(w, subject, "OnTop", FLOOR, xy)
            host = FLOOR
        else:
            mutated = place_object(w, subject, choice[0], choice[1])
            host = choice[1]
        mutation = {"variant": "relocate", "object": subject, "host": host}
        return self._case("I", goal, w, mutated, mutation, reachable_answers(goal, mutated), "relocate")

    # ------------------------------------------------------------ type II

    def type_ii(self, goal: GoalSpec, w: WorldGraph) -> List[GenCase]:
        token = self.knowledge.most_frequent(goal.goal_id)
        if token is None or not _tool_nodes(w, token):
            self.skipped["II"] += 1
            return []
        removed = _tool_nodes(w, token)
        mutated = remove_tools(w, removed)
        acceptable = reachable_answers(goal, mutated) & self._demonstrated(goal)
        case = self._case("II", goal, w, mutated, {"removed": removed, "token": token}, acceptable)
        return [case] if case else []

    # ------------------------------------------------------------ type III

    def substitute_token(self, token: str) -> Optional[str]:
        """知识库中最近、且未出现在任何训练场景中的替代工具"""
        candidates = [t for t in GenTestConstants.ALTERNATE_TOOLS if t not in self.knowledge.scene_tokens]
        ranked = nearest(token, candidates, self.kb, k=1)
        return ranked[0][0] if ranked else None

    def _same_role(self, w: WorldGraph, original: ObjectNode, keep: Set[str]) -> List[str]:
        out = []
        for n in w.nodes:
            if n.id in keep or not n.is_tool or not n.has("is-movable"):
                continue
            overlap = bool(n.functions & original.functions)
            climb = n.has("can-climb") and original.has("can-climb")
            if overlap or climb or n.token == original.token:
                out.append(n.id)
        return sorted(out)

    def type_iii(self, goal: GoalSpec, w: WorldGraph) -> List[GenCase]:
        token = self._present_tool(goal, w)
        sub = self.substitute_token(token) if token else None
        if sub is None:
            self.skipped["III"] += 1
            return []
        original = w.node(_tool_nodes(w, token)[0])
        mutated = replace_objects(w, _tool_nodes(w, token), sub, inherit_node(sub))
        allowed = self._demonstrated(goal) | {sub, NO_TOOL}
        mutation = {"replaced": token, "with": sub}
        cases = [self._case("III", goal, w, mutated, mutation, reachable_answers(goal, mutated) & allowed)]

        keep = {n.id for n in mutated.nodes if n.token == sub}
        others = self._same_role(mutated, original, keep)
        strict = remove_tools(mutated, others) if others else mutated
        strict_acceptable = reachable_answers(goal, strict) & allowed
        if strict_acceptable == {sub}:
            strict_mutation = dict(mutation, removed=others)
            cases.append(self._case("III", goal, w, strict, strict_mutation, strict_acceptable, STRICT))
        return [c for c in cases if c is not None]

    # ------------------------------------------------------------ type IV

    def type_iv(self, goal: GoalSpec, w: WorldGraph) -> List[GenCase]:
        token = self._present_tool(goal, w)
        if token is None:
            self.skipped["IV"] += 1
            return []
        rng = _rng(self.seed, self.domain, goal.goal_id, w.seed, "IV")
        unrelated = GenTestConstants.UNRELATED_OBJECTS[int(rng.integers(len(GenTestConstants.UNRELATED_OBJECTS)))]
        mutated = replace_objects(w, _tool_nodes(w, token), unrelated, plain_node(unrelated))
        case = self._case("IV", goal, w, mutated, {"replaced": token, "with": unrelated},
                          reachable_answers(goal, mutated))
        return [case] if case else []

    # ------------------------------------------------------------ type V

    def type_v(self, goal: GoalSpec, w: WorldGraph) -> List[GenCase]:
        replacements = GenTestConstants.GOAL_OBJECT_REPLACEMENTS.get(self.domain, {})
        subject = goal.constraints[0].subject
        if routine_for(goal) != "transport" or subject not in replacements:
            return []
        rng = _rng(self.seed, self.domain, goal.goal_id, w.seed, "V")
        options = replacements[subject]
        new_token = options[int(rng.integers(len(options)))]
        mutated = replace_objects(w, w.find(subject), new_token, spec_node(new_token, self.domain))
        new_goal = goal.replace_subject(subject, new_token)
        mutation = {"replaced": subject, "with": new_token}
        case = self._case("V", new_goal, w, mutated, mutation, reachable_answers(new_goal, mutated))
        return [case] if case else []

    # ------------------------------------------------------------ suites

    def generate(self, gen_type: str, scene_seeds: Sequence[int]) -> List[GenCase]:
        builder = {
            "I": self.type_i, "II": self.type_ii, "III": self.type_iii, "IV": self.type_iv, "V": self.type_v,
        }.get(gen_type)
        if builder is None:
            raise ContractError(f"unknown generalization type: {gen_type}")
        cases: List[GenCase] = []
        for goal, w in self.bases(scene_seeds):
            cases.extend(builder(goal, w))
        if not cases:
            logger.warning(f"{self.domain} 类型 {gen_type} 没有可用的基础对")
        return cases


@dataclass(frozen=True)
class GenTask:
    domain: str
    gen_type: str
    scene_seeds: Tuple[int, ...]
    seed: int
    plans: Tuple[DemoPlan, ...]
    kb: EmbeddingProvider


def _run_gen_task(task: GenTask) -> Tuple[str, List[GenCase], Dict[str, int]]:
    """工作进程入口"""
    knowledge = training_knowledge(task.plans, task.domain)
    generator = GenTestGenerator(task.domain, knowledge, task.kb, task.seed)
    cases = generator.generate(task.gen_type, task.scene_seeds)
    return task.gen_type, cases, dict(generator.skipped)


def gen_type(gen_type: str, plans: Sequence[DemoPlan], kb: EmbeddingProvider, seed: int,
             domain: str, scene_seeds: Sequence[int]) -> List[GenCase]:
    """单一类型的用例"""
    return _run_gen_task(GenTask(domain, gen_type, tuple(scene_seeds), seed, tuple(plans), kb))[1]


def generate_gentest(plans: Sequence[DemoPlan], kb: EmbeddingProvider, seed: int, domain: str,
                     scene_seeds: Sequence[int], workers: int = 1) -> Tuple[List[GenCase], Dict[str, int]]:
    """五类用例（各类型可并行），按类型顺序合并"""
    tasks = [GenTask(domain, t, tuple(scene_seeds), seed, tuple(plans), kb) for t in GenTestConstants.TYPES]
    results = WorkerPool(workers).map(_run_gen_task, tasks, sort_key=lambda r: GenTestConstants.TYPES.index(r[0]))
    cases: List[GenCase] = []
    skipped: Dict[str, int] = {}
    for gen, type_cases, type_skipped in results:
        cases.extend(type_cases)
        skipped[gen] = sum(type_skipped.values())
    counts = Counter(c.type for c in cases)
    log_info("泛化测试生成完成", domain=domain, **{f"type_{t}": counts.get(t, 0) for t in GenTestConstants.TYPES})
    return cases, skipped


# ====================================================================== scoring

def score(prediction: str, case: GenCase) -> bool:
    return prediction in case.acceptable


def _type_score(flags: Sequence[bool]) -> GenTypeScore:
    correct = int(sum(flags))
    return GenTypeScore(cases=len(flags), correct=correct, accuracy=correct / len(flags) if flags else 0.0)


def summarize(model: str, domain: str, cases: Sequence[GenCase], predictions: Sequence[str],
              skipped: Optional[Dict[str, int]] = None) -> GenTestSummary:
    """按类型汇总（严格的 Type III 变体单独计分，不计入类型列）"""
    if len(cases) != len(predictions):
        raise ContractError("one prediction per case is required")
    per_type: Dict[str, List[bool]] = {t: [] for t in GenTestConstants.TYPES}
    strict: List[bool] = []
    for case, prediction in zip(cases, predictions):
        hit = score(prediction, case)
        if case.variant == STRICT:
            strict.append(hit)
        else:
            per_type[case.type].append(hit)
    overall = [hit for flags in per_type.values() for hit in flags]
    return GenTestSummary(
        model=model,
        domain=domain,
        per_type={t: _type_score(flags) for t, flags in per_type.items()},
        total=_type_score(overall),
        strict_type_iii=_type_score(strict),
        skipped=dict(skipped or {}),
    )


def load_cases(documents: Iterable[GenCaseDocument]) -> List[GenCase]:
    return [GenCase.from_document(doc) for doc in documents]


def evaluate_gentest(model: ToolNet, label: str, domain: str, cases: Sequence[GenCase], provider,
                     workers: int = 1, skipped: Optional[Dict[str, int]] = None,
                     ) -> Tuple[GenTestSummary, Dict[str, EvalResult]]:
    """预测并计分；返回汇总和结果表所需的逐类型结果（不含严格变体）"""
    cases = [c for c in cases if c.domain == domain]
    predictions = predict_cases(model, [c.to_eval_case() for c in cases], provider, workers)
    summary = summarize(label, domain, cases, predictions, skipped)
    per_type = {
        t: EvalResult(s.correct, s.cases)
        for t, s in summary.per_type.items() if s.cases
    }
    return summary, per_type
