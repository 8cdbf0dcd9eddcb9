"""
ToolNet Pipeline Teacher Service
脚本化示教：为每个 (goal, scene) 枚举可行策略并按风格种子抽样
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from app.core.constants import NO_TOOL, DomainConstants, WorldConstants
from app.core.error_handler import ContractError, TeachingFailure
from app.models.world_models import GoalSpec, SymbolicAction, WorldGraph
from app.schemas.corpus_schemas import DemoPlan, PlanSource
from app.services.world_service import apply, check, has_usable_fuel, plan_cost, satisfied, subject_holds

logger = logging.getLogger(__name__)

AGENT = WorldConstants.AGENT_ID
FLOOR = WorldConstants.FLOOR_ID

HAND_CARRY_WEIGHT = 0.3
DISTANCE_SCALE = 3.0

# (domain, goal_id) -> 示教例程
ROUTINES: Dict[Tuple[str, int], str] = {
    ("home", 1): "transport",
    ("home", 2): "transport",
    ("home", 3): "clean",
    ("home", 4): "adhere",
    ("home", 5): "transport",
    ("home", 6): "transport",
    ("home", 7): "weight",
    ("home", 8): "switch",
    ("factory", 1): "transport",
    ("factory", 2): "adhere",
    ("factory", 3): "board",
    ("factory", 4): "generator",
    ("factory", 5): "parts",
    ("factory", 6): "transport",
    ("factory", 7): "clean",
    ("factory", 8): "clean",
}

DRIVER_FOR = {"nail": "drives:nail", "screw": "drives:screw"}


@dataclass(frozen=True)
class TeacherOption:
    """一个示教策略：主选择 + 取高处物体的方式"""

    routine: str
    choice: Tuple[str, ...]
    access: Optional[str] = None
    base_weight: float = 1.0


@dataclass(frozen=True)
class TeacherPlan:
    """成功构建的策略及其计划"""

    option: TeacherOption
    actions: Tuple[SymbolicAction, ...]
    tools_used: FrozenSet[str]
    weight: float
    cost: float

    @property
    def answer_tokens(self) -> FrozenSet[str]:
        return self.tools_used if self.tools_used else frozenset({NO_TOOL})


def goal_targets(goal: GoalSpec) -> FrozenSet[str]:
    return frozenset(c.target for c in goal.constraints if c.target)


def tools_used(actions: Sequence[SymbolicAction], w: WorldGraph, goal: GoalSpec) -> FrozenSet[str]:
    """动作参数中出现的工具类物体（约束目标本身不算工具）"""
    targets = goal_targets(goal)
    used = set()
    for action in actions:
        for object_id in action.args:
            if not w.has_node(object_id):
                continue
            node = w.node(object_id)
            if node.is_tool and not any(node.matches(t) for t in targets):
                used.add(node.token)
    return frozenset(used)


class PlanBuilder:
    """在模拟器上逐步构建计划；任何前提失败都抛出 TeachingFailure"""

    def __init__(self, goal: GoalSpec, world: WorldGraph, access: Optional[str] = None):
        self.goal = goal
        self.world = world
        self.access = access
        self.actions: List[SymbolicAction] = []
        self._reaching = False

    def fail(self, predicate: str) -> None:
        raise TeachingFailure(self.goal.text, predicate)

    def do(self, name: str, target: str) -> None:
        action = SymbolicAction(name, (target,))
        failed = check(action, self.world)
        if failed is not None:
            self.fail(f"{action}: {failed}")
        self.world = apply(action, self.world)
        self.actions.append(action)

    def goto(self, target: str) -> None:
        w = self.world
        if w.climbed_on is not None:
            self.do("ClimbDown", w.climbed_on)
            w = self.world
        if w.agent_at == target and w.distance(AGENT, target, planar=True) < 1e-6:
            return
        if w.is_outdoor(target) != w.is_outdoor(w.agent_at):
            doors = [n.id for n in w.nodes if n.does("door")]
            if doors and target not in doors and "open" not in w.node(doors[0]).states:
                self.goto(doors[0])
                self.do("Open", doors[0])
        self.do("MoveTo", target)

    def open_if_closed(self, target: str) -> None:
        node = self.world.node(target)
        if node.has("can-open") and "open" not in node.states:
            self.do("Open", target)

    def stow(self) -> None:
        """放下手中物体；站在可移动的承载物旁时先走到其宿主处"""
        w = self.world
        held = w.held_id
        if held is None:
            return
        at = w.agent_at
        if at is not None and at != held and at not in w.descendants(held):
            node = w.node(at)
            if node.has("is-movable") and (node.has("is-surface") or node.has("is-container")):
                parent = w.parent(at)
                self.goto(parent.dst if parent is not None else FLOOR)
        self.do("Drop", held)

    def fetch(self, object_id: str) -> None:
        if self.world.held_id == object_id:
            return
        self.stow()
        for container in self.world.enclosing_closed(object_id):
            self.goto(container)
            self.do("Open", container)
        self.goto(object_id)
        if not self.world.is_near(AGENT, object_id):
            self.reach(object_id)
        self.do("Pick", object_id)
        climbed = self.world.climbed_on
        if climbed is not None:
            self.do("ClimbDown", climbed)

    def reach(self, object_id: str) -> None:
        """够不着时：搬来可攀爬物爬上去，或用推杆把物体推到地面"""
        tool = self.access
        if tool is None or tool == object_id or self._reaching or not self.world.has_node(tool):
            self.fail(f"{object_id} within reach")
        self._reaching = True
        try:
            if self.world.node(tool).has("can-climb"):
                self.fetch(tool)
                self.goto(object_id)
                self.do("Drop", tool)
                self.do("ClimbUp", tool)
            else:
                self.fetch(tool)
                self.goto(object_id)
                self.do("Push", object_id)
                self.stow()
                self.goto(object_id)
        finally:
            self._reaching = False

    def transport(self, subjects: Sequence[str], dest: str, carrier: Optional[str]) -> None:
        if carrier is not None:
            self.goto(carrier)
            self.open_if_closed(carrier)
            for subject in subjects:
                self.fetch(subject)
                self.goto(carrier)
                self.do("Drop", subject)
            self.fetch(carrier)
            self.goto(dest)
            self.open_if_closed(dest)
            self.do("Drop", carrier)
            return
        for subject in subjects:
            self.fetch(subject)
            self.goto(dest)
            self.open_if_closed(dest)
            self.do("Drop", subject)

    def adhere(self, subject: str, adhesive: str, wall: str) -> None:
        self.fetch(adhesive)
        self.goto(subject)
        self.do("ReleaseMaterial", subject)
        self.fetch(subject)
        self.goto(wall)
        self.do("PushUntilForce", subject)

    def fasten(self, subject: str, fastener: str, driver: str) -> None:
        self.fetch(fastener)
        self.goto(subject)
        self.do("Drop", fastener)
        self.fetch(driver)
        self.goto(subject)
        self.do("Operate", subject)


# ---------------------------------------------------------------- scene queries

def _first(w: WorldGraph, token: str) -> str:
    found = sorted(w.find(token))
    if not found:
        raise ContractError(f"no {token} in scene {w.domain}/{w.seed}")
    return found[0]


def _movable(w: WorldGraph, predicate: Callable) -> List[str]:
    return sorted(n.id for n in w.nodes if n.id != AGENT and n.has("is-movable") and predicate(n))


def _placement_constraint(goal: GoalSpec):
    for c in goal.constraints:
        if c.kind in ("inside", "ontop"):
            return c
    raise ContractError(f"goal {goal.goal_id} has no placement constraint")


def _pending_subjects(goal: GoalSpec, w: WorldGraph) -> List[str]:
    """尚未满足放置约束的目标物体，按离目的地由近到远"""
    c = _placement_constraint(goal)
    dest = _first(w, c.target)
    subjects = [s for s in w.find(c.subject) if not subject_holds(c, w, s)]
    return sorted(subjects, key=lambda s: (round(w.distance(s, dest, planar=True), 6), s))


def _access_choices(w: WorldGraph) -> List[Optional[str]]:
    climbables = _movable(w, lambda n: n.has("can-climb"))
    pushers = _movable(w, lambda n: n.does("pusher"))
    return [None] + climbables + pushers


def _drivers(w: WorldGraph, fastener: str) -> List[str]:
    kind = w.node(fastener).token
    function = DRIVER_FOR.get(kind)
    return _movable(w, lambda n: function in n.functions) if function else []


def _fastening_pairs(w: WorldGraph) -> List[Tuple[str, str]]:
    fasteners = _movable(w, lambda n: n.matches("fastener"))
    return [(f, d) for f in fasteners for d in _drivers(w, f)]


# ---------------------------------------------------------------- routines

def _choices(routine: str, goal: GoalSpec, w: WorldGraph) -> List[Tuple[Tuple[str, ...], float]]:
    """主选择及基础权重"""
    if routine == "transport":
        c = _placement_constraint(goal)
        subjects = [w.node(s) for s in w.find(c.subject)]
        carriers = _movable(
            w,
            lambda n: n.does("carrier")
            and not n.matches(c.target)
            and not n.matches(c.subject)
            and all(s.fits_in(n) for s in subjects),
        )
        return [((carrier,), 1.0) for carrier in carriers] + [((), HAND_CARRY_WEIGHT)]
    if routine == "clean":
        spill = w.node(_first(w, goal.constraints[0].subject))
        agents = _movable(w, lambda n: any(f"cleans:{t}" in n.functions for t in spill.semantic_tokens))
        return [((a,), 1.0) for a in agents]
    if routine == "adhere":
        return [((a,), 1.0) for a in _movable(w, lambda n: n.does("adhesive"))]
    if routine == "board":
        adhesives = [((a,), 1.0) for a in _movable(w, lambda n: n.does("adhesive"))]
        return adhesives + [((f, d), 1.0) for f, d in _fastening_pairs(w)]
    if routine == "generator":
        generator = _first(w, "generator")
        if has_usable_fuel(w, generator):
            return [((), 1.0)]
        out = []
        for fuel in _movable(w, lambda n: n.does("fuel") and not n.matches("generator")):
            if w.node(fuel).does("needs-cut"):
                out.extend(((fuel, cutter), 1.0) for cutter in _movable(w, lambda n: n.does("cuts")))
            else:
                out.append(((fuel,), 1.0))
        return out
    if routine == "parts":
        welders = [(w_id,) for w_id in _movable(w, lambda n: n.does("welds"))]
        joins = welders + list(_fastening_pairs(w))
        painters = _movable(w, lambda n: n.does("paints"))
        return [(join + (painter,), 1.0) for join, painter in itertools.product(joins, painters)]
    if routine == "weight":
        c = _placement_constraint(goal)
        target = _first(w, c.target)
        by_token: Dict[str, str] = {}
        for object_id in sorted(w.find(c.subject), key=lambda s: (w.distance(s, target, planar=True), s)):
            by_token.setdefault(w.node(object_id).token, object_id)
        return [((object_id,), 1.0) for _, object_id in sorted(by_token.items())]
    if routine == "switch":
        return [((), 1.0)]
    raise ContractError(f"unknown teacher routine: {routine}")


def _build(routine: str, goal: GoalSpec, w: WorldGraph, option: TeacherOption) -> PlanBuilder:
    b = PlanBuilder(goal, w, option.access)
    choice = option.choice
    if routine == "transport" or routine == "weight":
        c = _placement_constraint(goal)
        dest = _first(w, c.target)
        if routine == "weight":
            b.transport(list(choice), dest, None)
        else:
            b.transport(_pending_subjects(goal, w), dest, choice[0] if choice else None)
    elif routine == "clean":
        spill = _first(w, goal.constraints[0].subject)
        b.fetch(choice[0])
        b.goto(spill)
        b.do("Clean", spill)
    elif routine == "adhere":
        b.adhere(_first(w, goal.constraints[0].subject), choice[0], _first(w, "wall"))
    elif routine == "board":
        board, wall = _first(w, "board"), _first(w, "wall")
        if len(choice) == 1:
            b.adhere(board, choice[0], wall)
        else:
            b.fetch(board)
            b.goto(wall)
            b.do("Drop", board)
            b.fasten(board, choice[0], choice[1])
    elif routine == "generator":
        generator = _first(w, "generator")
        if choice:
            fuel = choice[0]
            if len(choice) == 2:
                b.fetch(choice[1])
                b.goto(fuel)
                b.do("Operate", fuel)
            b.fetch(fuel)
            b.goto(generator)
            b.do("Drop", fuel)
        b.stow()
        b.goto(generator)
        b.do("Operate", generator)
    elif routine == "parts":
        parts, station = _first(w, "parts"), _first(w, "assembly-station")
        b.transport([parts], station, None)
        if len(choice) == 2:
            b.fetch(choice[0])
            b.goto(parts)
            b.do("Operate", parts)
        else:
            b.fasten(parts, choice[0], choice[1])
        b.fetch(choice[-1])
        b.goto(parts)
        b.do("Operate", parts)
    elif routine == "switch":
        switch = _first(w, goal.constraints[0].subject)
        b.stow()
        b.goto(switch)
        if not b.world.is_near(AGENT, switch):
            b.reach(switch)
        b.do("SwitchOn", switch)
    if not satisfied(goal, b.world):
        b.fail("goal satisfied")
    return b


def _anchor(goal: GoalSpec, w: WorldGraph) -> str:
    """工具距离的参照物：首个目标物体"""
    subject = goal.constraints[0].subject
    found = sorted(w.find(subject))
    return found[0] if found else AGENT


def routine_for(goal: GoalSpec) -> str:
    try:
        return ROUTINES[(goal.domain, goal.goal_id)]
    except KeyError:
        raise ContractError(f"no teacher routine for {goal.domain}/{goal.goal_id}") from None


def enumerate_options(goal: GoalSpec, w: WorldGraph) -> List[TeacherOption]:
    routine = routine_for(goal)
    access = _access_choices(w)
    return [
        TeacherOption(routine, choice, a, weight)
        for (choice, weight), a in itertools.product(_choices(routine, goal, w), access)
    ]


def enumerate_plans(goal: GoalSpec, w: WorldGraph) -> Tuple[List[TeacherPlan], List[TeachingFailure]]:
    """构建全部策略；相同动作序列只保留一次"""
    routine = routine_for(goal)
    anchor = _anchor(goal, w)
    plans: List[TeacherPlan] = []
    failures: List[TeachingFailure] = []
    seen = set()
    for option in enumerate_options(goal, w):
        try:
            builder = _build(routine, goal, w, option)
        except TeachingFailure as e:
            failures.append(e)
            continue
        actions = tuple(builder.actions)
        if actions in seen:
            continue
        seen.add(actions)
        used = tools_used(actions, w, goal)
        used_ids = {
            a.target for a in actions
            if w.has_node(a.target) and w.node(a.target).token in used
        }
        distance = sum(w.distance(t, anchor, planar=True) for t in sorted(used_ids))
        weight = option.base_weight * math.exp(-distance / DISTANCE_SCALE)
        plans.append(TeacherPlan(option, actions, used, weight, plan_cost(actions, w)))
    return plans, failures


def reachable_answers(goal: GoalSpec, w: WorldGraph) -> FrozenSet[str]:
    """可完成目标的全部工具词（无工具计划对应 no-tool）"""
    plans, _ = enumerate_plans(goal, w)
    answers = set()
    for plan in plans:
        answers |= plan.answer_tokens
    return frozenset(answers)


def witness_depth(goal: GoalSpec, w: WorldGraph) -> Optional[int]:
    """示教计划的最短长度，作为规划搜索的见证深度"""
    if satisfied(goal, w):
        return 0
    plans, _ = enumerate_plans(goal, w)
    return min((len(p.actions) for p in plans), default=None)


def _style_rng(goal: GoalSpec, w: WorldGraph, style_seed: int) -> np.random.Generator:
    return np.random.default_rng(
        [DomainConstants.DOMAINS.index(goal.domain), goal.goal_id, w.seed, style_seed]
    )


def _to_demo(goal: GoalSpec, w: WorldGraph, plan: TeacherPlan, style_seed: int) -> DemoPlan:
    return DemoPlan(
        domain=goal.domain,
        goal_id=goal.goal_id,
        scene_seed=w.seed,
        removed=list(w.removed),
        style_seed=style_seed,
        actions=[str(a) for a in plan.actions],
        tools_used=sorted(plan.tools_used),
        sim_cost=plan.cost,
        source=PlanSource.TEACHER,
        provenance=f"{plan.option.routine}:{'+'.join(plan.option.choice) or '-'}",
    )


def teach_many(goal: GoalSpec, w: WorldGraph, style_seeds: Sequence[int]) -> List[DemoPlan]:
    """同一 (goal, scene) 的多次示教，策略只枚举一次"""
    plans, failures = enumerate_plans(goal, w)
    if not plans:
        predicate = failures[0].predicate if failures else "no teacher option"
        raise TeachingFailure(goal.text, predicate)
    weights = np.array([p.weight for p in plans])
    weights = weights / weights.sum()
    demos = []
    for style_seed in style_seeds:
        index = int(_style_rng(goal, w, style_seed).choice(len(plans), p=weights))
        demos.append(_to_demo(goal, w, plans[index], style_seed))
    logger.debug(f"示教完成: {goal.domain}/{goal.goal_id} scene={w.seed} 可选策略={len(plans)}")
    return demos


def teach(goal: GoalSpec, w: WorldGraph, style_seed: int) -> DemoPlan:
    return teach_many(goal, w, [style_seed])[0]
