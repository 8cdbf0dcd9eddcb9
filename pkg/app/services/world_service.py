"""
ToolNet Pipeline World Service
场景生成与符号动作模拟器（前提条件 / 效果表）
"""

import logging
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from app.core.constants import (
    GOALS,
    OBJECT_SPECS,
    ActionConstants,
    DomainConstants,
    WorldConstants,
)
from app.core.error_handler import ContractError, ObjectLookupError, PreconditionViolation
from app.models.world_models import (
    SUPPORT_RELATIONS,
    Constraint,
    Edge,
    GoalSpec,
    ObjectNode,
    SymbolicAction,
    WorldGraph,
)

logger = logging.getLogger(__name__)

AGENT = WorldConstants.AGENT_ID
FLOOR = WorldConstants.FLOOR_ID
REACH = WorldConstants.AGENT_REACH
NEAR = WorldConstants.NEAR_THRESHOLD


# ====================================================================== goals

def goals_for(domain: str) -> List[GoalSpec]:
    """领域的 8 个目标"""
    if domain not in GOALS:
        raise ContractError(f"unknown domain: {domain}")
    goals = []
    for spec in GOALS[domain]:
        constraints = []
        for c in spec["constraints"]:
            if c[0] == "state":
                _, subject, attributes, value, quantifier = c
                constraints.append(Constraint("state", subject, "", tuple(attributes), value, quantifier))
            else:
                kind, subject, target, quantifier = c
                constraints.append(Constraint(kind, subject, target, (), True, quantifier))
        goals.append(GoalSpec(
            domain=domain,
            goal_id=spec["goal_id"],
            text_tokens=tuple(spec["text"].split()),
            object_tokens=tuple(spec["objects"]),
            constraints=tuple(constraints),
        ))
    return goals


def goal_by_id(domain: str, goal_id: int) -> GoalSpec:
    for goal in goals_for(domain):
        if goal.goal_id == goal_id:
            return goal
    raise ContractError(f"unknown goal {domain}/{goal_id}")


# ====================================================================== scene generation

def make_node(object_id: str, token: str, pos, domain: str, **overrides) -> ObjectNode:
    """按类别规格构造节点"""
    spec = OBJECT_SPECS.get(token, {})
    flags = set(spec.get("flags", ()))
    if token in DomainConstants.TOOLS.get(domain, ()):
        flags.add("is-tool")
    fields = dict(
        id=object_id,
        token=token,
        pos=tuple(float(v) for v in pos),
        size=tuple(spec.get("size", (0.2, 0.2, 0.2))),
        categories=tuple(spec.get("categories", ())),
        states=frozenset(spec.get("states", ())),
        flags=frozenset(flags),
        functions=frozenset(spec.get("functions", ())),
        capacity=spec.get("capacity"),
        climb_height=float(spec.get("climb_height", 0.0)),
    )
    fields.update(overrides)
    return ObjectNode(**fields)


def _snap(value: float) -> float:
    grid = WorldConstants.GRID_RESOLUTION
    return round(round(value / grid) * grid, 6)


def _top(node: ObjectNode) -> float:
    return node.pos[2] + node.size[2] / 2.0


def _on_top_pos(host: ObjectNode, obj_size, xy=None) -> Tuple[float, float, float]:
    x, y = xy if xy is not None else host.pos[:2]
    return (float(x), float(y), round(_top(host) + obj_size[2] / 2.0, 6))


def _inside_pos(host: ObjectNode, obj_size, xy=None) -> Tuple[float, float, float]:
    x, y = xy if xy is not None else host.pos[:2]
    bottom = host.pos[2] - host.size[2] / 2.0
    return (float(x), float(y), round(bottom + 0.01 + obj_size[2] / 2.0, 6))


class SceneBuilder:
    """按语义放置先验生成场景"""

    def __init__(self, domain: str, seed: int):
        if domain not in DomainConstants.DOMAINS:
            raise ContractError(f"unknown domain: {domain}")
        if seed < 0:
            raise ContractError(f"scene seed must be >= 0, got {seed}")
        self.domain = domain
        self.seed = seed
        self.rng = np.random.default_rng([DomainConstants.DOMAINS.index(domain), seed])
        self.nodes: Dict[str, ObjectNode] = {}
        self.edges: Set[Edge] = set()
        self.floor_spots: List[Tuple[float, float, float]] = []

    def _add(self, node: ObjectNode) -> ObjectNode:
        self.nodes[node.id] = node
        return node

    def _free_xy(self, min_gap: float, low: float = 1.0, high: float = 9.0) -> Tuple[float, float]:
        best = None
        for _ in range(200):
            x, y = _snap(self.rng.uniform(low, high)), _snap(self.rng.uniform(low, high))
            gaps = [np.hypot(x - sx, y - sy) - r for sx, sy, r in self.floor_spots]
            if not gaps or min(gaps) >= min_gap:
                return x, y
            if best is None or min(gaps) > best[0]:
                best = (min(gaps), x, y)
        return best[1], best[2]

    def _jitter(self, host: ObjectNode, limit: float) -> Tuple[float, float]:
        jx = min(limit, max(0.0, host.size[0] / 2.0 - 0.1))
        jy = min(limit, max(0.0, host.size[1] / 2.0 - 0.1))
        return (_snap(host.pos[0] + self.rng.uniform(-jx, jx)), _snap(host.pos[1] + self.rng.uniform(-jy, jy)))

    def _omitted_tools(self) -> Set[str]:
        """按概率省略非必需工具，但每个必需组至少保留一个"""
        tools = sorted(DomainConstants.TOOLS[self.domain])
        groups = DomainConstants.REQUIRED_GROUPS[self.domain]
        present_tokens = {token for token, _ in DomainConstants.ITEMS[self.domain]}
        omitted: Set[str] = set()
        for token in tools:
            draw = self.rng.random()
            if token not in present_tokens or draw >= WorldConstants.TOOL_OMISSION_PROB:
                continue
            trial = omitted | {token}
            if all(any(t not in trial for t in group) for group in groups):
                omitted = trial
        return omitted

    def build(self) -> WorldGraph:
        floor = self._add(make_node(FLOOR, "floor", (5.0, 5.0, 0.005), self.domain))
        wall = self._add(make_node("wall", "wall", (5.0, 9.95, 1.5), self.domain))

        if DomainConstants.HAS_DOOR[self.domain]:
            self._add(make_node("door", "door", (0.05, 5.0, 1.0), self.domain))
            dumpster = make_node("dumpster", "dumpster", (0.0, 0.0, 0.0), self.domain)
            self._add(dumpster.replace(pos=(-1.5, _snap(self.rng.uniform(3.0, 7.0)), dumpster.size[2] / 2.0)))

        for token in DomainConstants.FURNITURE[self.domain]:
            node = make_node(token, token, (0.0, 0.0, 0.0), self.domain)
            x, y = self._free_xy(WorldConstants.FURNITURE_MIN_GAP)
            self.floor_spots.append((x, y, max(node.size[:2]) / 2.0))
            self._add(node.replace(pos=(x, y, node.size[2] / 2.0)))
            self.edges.add(Edge("OnTop", token, FLOOR))

        if self.domain == "home":
            switch = make_node("light-switch", "light-switch", (0.0, 0.0, 0.0), self.domain)
            height = float(self.rng.choice(DomainConstants.SWITCH_HEIGHTS))
            self._add(switch.replace(pos=(_snap(self.rng.uniform(2.0, 8.0)), 9.9, height)))
            self.edges.add(Edge("ConnectedTo", "light-switch", "wall"))

        omitted = self._omitted_tools()
        placements = DomainConstants.PLACEMENTS[self.domain]
        for token, count in DomainConstants.ITEMS[self.domain]:
            if token in omitted:
                continue
            choices = placements.get(token, [("floor",)])
            for k in range(count):
                object_id = token if count == 1 else f"{token}#{k}"
                placement = choices[int(self.rng.integers(len(choices)))]
                self._place(make_node(object_id, token, (0.0, 0.0, 0.0), self.domain), placement)

        ax, ay = self._free_xy(0.5)
        self._add(make_node(AGENT, "robot", (ax, ay, REACH), self.domain))

        world = WorldGraph(
            domain=self.domain,
            seed=self.seed,
            nodes=tuple(self.nodes.values()),
            edges=frozenset(self.edges),
        )
        return with_near(world)

    def _place(self, node: ObjectNode, placement: tuple) -> None:
        if placement[0] == "floor" or placement[1] not in self.nodes:
            x, y = self._free_xy(0.3)
            self.floor_spots.append((x, y, 0.2))
            floor = self.nodes[FLOOR]
            self._add(node.replace(pos=_on_top_pos(floor, node.size, (x, y))))
            self.edges.add(Edge("OnTop", node.id, FLOOR))
            return
        rel, host_id = placement
        host = self.nodes[host_id]
        if rel == "Inside":
            xy = self._jitter(host, 0.1)
            self._add(node.replace(pos=_inside_pos(host, node.size, xy), states=node.states | {"inside"}))
        else:
            xy = self._jitter(host, WorldConstants.PLACEMENT_JITTER)
            self._add(node.replace(pos=_on_top_pos(host, node.size, xy)))
        self.edges.add(Edge(rel, node.id, host_id))


def make_scene(domain: str, seed: int) -> WorldGraph:
    """确定性生成 (domain, seed) 场景"""
    return SceneBuilder(domain, seed).build()


def remove_objects(w: WorldGraph, object_ids: Iterable[str]) -> WorldGraph:
    """删除物体及其相关边"""
    drop = set(object_ids)
    for object_id in drop:
        w.node(object_id)
    nodes = [n for n in w.nodes if n.id not in drop]
    edges = frozenset(e for e in w.edges if e.src not in drop and e.dst not in drop)
    world = w.replace_nodes(nodes, edges, removed=tuple(sorted(set(w.removed) | drop)))
    return with_near(world)


# ====================================================================== Near

def _near_candidates(nodes: Sequence[ObjectNode]) -> List[ObjectNode]:
    return [n for n in nodes if n.token not in WorldConstants.EXTENDED_TOKENS]


def with_near(w: WorldGraph) -> WorldGraph:
    """重新计算所有 Near 边（对称存储）"""
    base = {e for e in w.edges if e.rel != "Near"}
    candidates = _near_candidates(w.nodes)
    if len(candidates) > 1:
        pos = np.array([n.pos for n in candidates])
        diff = pos[:, None, :] - pos[None, :, :]
        close = np.sqrt((diff ** 2).sum(axis=-1)) < NEAR
        np.fill_diagonal(close, False)
        for i, j in zip(*np.nonzero(close)):
            base.add(Edge("Near", candidates[i].id, candidates[j].id))
    return w.replace_nodes(w.nodes, frozenset(base))


def _refresh_near(w: WorldGraph, moved: Set[str]) -> WorldGraph:
    """只重算位置变化物体的 Near 边"""
    if not moved:
        return w
    kept = {e for e in w.edges if not (e.rel == "Near" and (e.src in moved or e.dst in moved))}
    candidates = _near_candidates(w.nodes)
    movers = [n for n in candidates if n.id in moved]
    if movers and candidates:
        pos = np.array([n.pos for n in candidates])
        for m in movers:
            dist = np.sqrt(((pos - np.array(m.pos)) ** 2).sum(axis=-1))
            for idx in np.nonzero(dist < NEAR)[0]:
                other = candidates[idx].id
                if other != m.id:
                    kept.add(Edge("Near", m.id, other))
                    kept.add(Edge("Near", other, m.id))
    return w.replace_nodes(w.nodes, frozenset(kept))


# ====================================================================== simulator helpers

class _Draft:
    """动作效果的可变草稿，最后冻结为新 WorldGraph"""

    def __init__(self, w: WorldGraph):
        self.origin = w
        self.nodes: Dict[str, ObjectNode] = dict(w.index)
        self.edges: Set[Edge] = {e for e in w.edges}
        self.agent_at = w.agent_at
        self.moved: Set[str] = set()

    def node(self, object_id: str) -> ObjectNode:
        return self.nodes[object_id]

    def add_state(self, object_id: str, *attrs: str) -> None:
        n = self.nodes[object_id]
        self.nodes[object_id] = n.replace(states=n.states | set(attrs))

    def drop_state(self, object_id: str, *attrs: str) -> None:
        n = self.nodes[object_id]
        self.nodes[object_id] = n.replace(states=n.states - set(attrs))

    def detach(self, object_id: str) -> None:
        for e in [e for e in self.edges if e.src == object_id and e.rel in SUPPORT_RELATIONS]:
            self.edges.discard(e)
        self.drop_state(object_id, "inside")

    def attach(self, rel: str, object_id: str, host_id: str) -> None:
        self.edges.add(Edge(rel, object_id, host_id))
        if rel == "Inside":
            self.add_state(object_id, "inside")

    def move_subtree(self, root_id: str, new_pos) -> None:
        """移动物体，承载的物体随之平移"""
        old = np.array(self.nodes[root_id].pos)
        delta = np.array(new_pos, dtype=float) - old
        if not np.any(delta):
            return
        for object_id in [root_id] + self.origin.descendants(root_id):
            n = self.nodes[object_id]
            self.nodes[object_id] = n.replace(pos=tuple(round(float(v), 6) for v in np.array(n.pos) + delta))
            self.moved.add(object_id)

    def freeze(self) -> WorldGraph:
        w = self.origin.replace_nodes(
            [self.nodes[n.id] for n in self.origin.nodes],
            frozenset(self.edges),
            agent_at=self.agent_at,
        )
        return _refresh_near(w, self.moved)


def _hand(w: WorldGraph) -> Tuple[float, float, float]:
    return w.agent.pos


def _pairs_crossing_door(w: WorldGraph, target: str) -> bool:
    return w.is_outdoor(target) != w.is_outdoor(w.agent_at)


def _door_open(w: WorldGraph) -> bool:
    doors = [n for n in w.nodes if n.does("door")]
    return any("open" in n.states for n in doors)


def _in_held_subtree(w: WorldGraph, object_id: str) -> bool:
    held = w.held_id
    return held is not None and (object_id == held or object_id in w.descendants(held))


def drop_destination(w: WorldGraph, object_id: str) -> Tuple[str, str]:
    """Drop 的落点：(relation, host)"""
    target_id = w.agent_at
    obj = w.node(object_id)
    if target_id is None or obj.has("can-climb"):
        return "OnTop", FLOOR
    target = w.node(target_id)
    if target_id == object_id or target_id in w.descendants(object_id):
        return "OnTop", FLOOR
    if target.has("is-container"):
        if target.does("fuel-tank"):
            if obj.does("fuel"):
                return "Inside", target_id
        elif not target.has("can-open") or "open" in target.states:
            return "Inside", target_id
    if target.has("is-surface"):
        return "OnTop", target_id
    return "OnTop", FLOOR


def _held_functions(w: WorldGraph) -> FrozenSet[str]:
    held = w.held_id
    return w.node(held).functions if held is not None else frozenset()


def _fastener_on(w: WorldGraph, target: str, kind: str) -> Optional[str]:
    for child in w.children(target):
        n = w.node(child)
        if n.matches("fastener") and n.token == kind and w.parent(child).rel == "OnTop":
            return child
    return None


def _wall_near(w: WorldGraph, object_id: str) -> Optional[str]:
    for n in w.nodes:
        if n.does("wall") and w.distance(n.id, object_id, planar=True) < NEAR:
            return n.id
    return None


def _has_usable_fuel(w: WorldGraph, device: str) -> bool:
    for child in w.children(device):
        n = w.node(child)
        if n.does("fuel") and (not n.does("needs-cut") or "cut" in n.states):
            return True
    return False


DEVICE_USES = ("welds", "paints", "cuts", "drives:nail", "drives:screw")


def _device_use(w: WorldGraph) -> Optional[str]:
    functions = _held_functions(w)
    for use in DEVICE_USES:
        if use in functions:
            return use
    return None


# ====================================================================== preconditions
# 每个前提检查返回第一个失败的谓词名，全部满足时返回 None

PreconditionFn = Callable[[WorldGraph, str], Optional[str]]


def _first_failure(checks: List[Tuple[str, Callable[[], bool]]]) -> Optional[str]:
    for predicate, holds in checks:
        if not holds():
            return predicate
    return None


def _pre_move_to(w: WorldGraph, t: str) -> Optional[str]:
    return _first_failure([
        ("target is not the agent", lambda: t != AGENT),
        ("target not carried", lambda: not _in_held_subtree(w, t)),
        ("agent on the ground", lambda: w.climbed_on is None),
        ("door open", lambda: not _pairs_crossing_door(w, t) or _door_open(w)),
    ])


def _pre_pick(w: WorldGraph, t: str) -> Optional[str]:
    n = w.node(t)
    return _first_failure([
        ("target is movable", lambda: n.has("is-movable")),
        ("gripper free", lambda: w.held_id is None),
        ("agent near target", lambda: w.is_near(AGENT, t)),
        ("target not enclosed", lambda: not w.enclosing_closed(t)),
        ("target not attached", lambda: not w.connected_to(t)),
        ("agent not standing on target", lambda: w.climbed_on != t),
    ])


def _pre_drop(w: WorldGraph, t: str) -> Optional[str]:
    def fits() -> bool:
        rel, host = drop_destination(w, t)
        return w.node(t).fits_in(w.node(host))

    return _first_failure([
        ("holding target", lambda: w.held_id == t),
        ("target fits destination", fits),
    ])


def _pre_open(w: WorldGraph, t: str) -> Optional[str]:
    n = w.node(t)
    return _first_failure([
        ("target can open", lambda: n.has("can-open")),
        ("target closed", lambda: "open" not in n.states),
        ("agent near target", lambda: w.is_near(AGENT, t)),
    ])


def _pre_close(w: WorldGraph, t: str) -> Optional[str]:
    n = w.node(t)
    return _first_failure([
        ("target can open", lambda: n.has("can-open")),
        ("target open", lambda: "open" in n.states),
        ("agent near target", lambda: w.is_near(AGENT, t)),
    ])


def _pre_switch_on(w: WorldGraph, t: str) -> Optional[str]:
    n = w.node(t)
    return _first_failure([
        ("target is a switch", lambda: n.does("switch")),
        ("switch off", lambda: "on" not in n.states),
        ("agent near target", lambda: w.is_near(AGENT, t)),
    ])


def _pre_switch_off(w: WorldGraph, t: str) -> Optional[str]:
    n = w.node(t)
    return _first_failure([
        ("target is a switch", lambda: n.does("switch")),
        ("switch on", lambda: "on" in n.states),
        ("agent near target", lambda: w.is_near(AGENT, t)),
    ])


def _pre_climb_up(w: WorldGraph, t: str) -> Optional[str]:
    n = w.node(t)

    def on_floor() -> bool:
        e = w.parent(t)
        return e is not None and e.rel == "OnTop" and e.dst == FLOOR

    return _first_failure([
        ("target can climb", lambda: n.has("can-climb")),
        ("agent on the ground", lambda: w.climbed_on is None),
        ("gripper free", lambda: w.held_id is None),
        ("agent near target", lambda: w.is_near(AGENT, t)),
        ("target on floor", on_floor),
    ])


def _pre_climb_down(w: WorldGraph, t: str) -> Optional[str]:
    return _first_failure([
        ("agent climbed on target", lambda: w.climbed_on == t),
    ])


def _pre_push(w: WorldGraph, t: str) -> Optional[str]:
    n = w.node(t)

    def off_floor() -> bool:
        e = w.parent(t)
        return e is not None and e.dst != FLOOR

    return _first_failure([
        ("holding pusher", lambda: "pusher" in _held_functions(w)),
        ("target is movable", lambda: n.has("is-movable")),
        ("target not carried", lambda: not _in_held_subtree(w, t)),
        ("target off the floor", off_floor),
        ("target not enclosed", lambda: not w.enclosing_closed(t)),
        ("target not attached", lambda: not w.connected_to(t)),
        ("target within pushing reach", lambda: w.distance(AGENT, t, planar=True) < NEAR),
    ])


def _pre_operate(w: WorldGraph, t: str) -> Optional[str]:
    n = w.node(t)
    use = _device_use(w)
    if use is not None:
        checks = [
            ("target not carried", lambda: not _in_held_subtree(w, t)),
            ("agent near target", lambda: w.is_near(AGENT, t)),
        ]
        if use == "welds":
            checks.append(("target can be welded", lambda: n.matches("parts") and "welded" not in n.states))
        elif use == "paints":
            checks.append(("target can be painted", lambda: n.has("is-movable") and "painted" not in n.states))
        elif use == "cuts":
            checks.append(("target can be cut", lambda: n.does("needs-cut") and "cut" not in n.states))
        else:
            kind = use.split(":", 1)[1]
            checks.append(("target not fastened", lambda: not {"driven", "drilled"} & n.states))
            checks.append((f"{kind} on target", lambda: _fastener_on(w, t, kind) is not None))
        return _first_failure(checks)
    return _first_failure([
        ("target is a device", lambda: n.does("device")),
        ("device off", lambda: "on" not in n.states),
        ("agent near target", lambda: w.is_near(AGENT, t)),
        ("fuel inside target", lambda: not n.does("fuel-tank") or _has_usable_fuel(w, t)),
    ])


def _pre_clean(w: WorldGraph, t: str) -> Optional[str]:
    n = w.node(t)
    functions = _held_functions(w)
    return _first_failure([
        ("target dirty", lambda: "dirty" in n.states),
        ("holding cleaning agent for target",
         lambda: any(f"cleans:{token}" in functions for token in n.semantic_tokens)),
        ("agent near target", lambda: w.is_near(AGENT, t)),
    ])


def _pre_release_material(w: WorldGraph, t: str) -> Optional[str]:
    n = w.node(t)
    return _first_failure([
        ("holding adhesive", lambda: "adhesive" in _held_functions(w)),
        ("target is movable", lambda: n.has("is-movable")),
        ("target not carried", lambda: not _in_held_subtree(w, t)),
        ("agent near target", lambda: w.is_near(AGENT, t)),
    ])


def _pre_push_until_force(w: WorldGraph, t: str) -> Optional[str]:
    n = w.node(t)
    return _first_failure([
        ("holding target", lambda: w.held_id == t),
        ("target sticky", lambda: "sticky" in n.states),
        ("agent at wall", lambda: w.agent_at is not None and w.node(w.agent_at).does("wall")),
    ])


PRECONDITIONS: Dict[str, PreconditionFn] = {
    "MoveTo": _pre_move_to,
    "Pick": _pre_pick,
    "Drop": _pre_drop,
    "Open": _pre_open,
    "Close": _pre_close,
    "SwitchOn": _pre_switch_on,
    "SwitchOff": _pre_switch_off,
    "ClimbUp": _pre_climb_up,
    "ClimbDown": _pre_climb_down,
    "Push": _pre_push,
    "Operate": _pre_operate,
    "Clean": _pre_clean,
    "ReleaseMaterial": _pre_release_material,
    "PushUntilForce": _pre_push_until_force,
}


# ====================================================================== effects

EffectFn = Callable[[_Draft, WorldGraph, str], None]


def _carry_to_hand(d: _Draft, w: WorldGraph, hand) -> None:
    held = w.held_id
    if held is not None:
        d.move_subtree(held, hand)


def _eff_move_to(d: _Draft, w: WorldGraph, t: str) -> None:
    target = w.node(t)
    hand = (target.pos[0], target.pos[1], REACH)
    d.move_subtree(AGENT, hand)
    _carry_to_hand(d, w, hand)
    d.agent_at = t


def _eff_pick(d: _Draft, w: WorldGraph, t: str) -> None:
    d.detach(t)
    d.add_state(t, "grabbed")
    d.move_subtree(t, _hand(w))


def _eff_drop(d: _Draft, w: WorldGraph, t: str) -> None:
    rel, host_id = drop_destination(w, t)
    host = w.node(host_id)
    size = w.node(t).size
    d.drop_state(t, "grabbed")
    d.attach(rel, t, host_id)
    if host_id == FLOOR:
        pos = _on_top_pos(host, size, w.agent.pos[:2])
    elif rel == "Inside":
        pos = _inside_pos(host, size)
    else:
        pos = _on_top_pos(host, size)
    d.move_subtree(t, pos)


def _eff_open(d: _Draft, w: WorldGraph, t: str) -> None:
    d.add_state(t, "open")


def _eff_close(d: _Draft, w: WorldGraph, t: str) -> None:
    d.drop_state(t, "open")


def _eff_switch_on(d: _Draft, w: WorldGraph, t: str) -> None:
    d.add_state(t, "on")


def _eff_switch_off(d: _Draft, w: WorldGraph, t: str) -> None:
    d.drop_state(t, "on")


def _eff_climb_up(d: _Draft, w: WorldGraph, t: str) -> None:
    d.edges.add(Edge("OnTop", AGENT, t))
    x, y, _ = w.agent.pos
    d.move_subtree(AGENT, (x, y, REACH + w.node(t).climb_height))


def _eff_climb_down(d: _Draft, w: WorldGraph, t: str) -> None:
    d.edges.discard(Edge("OnTop", AGENT, t))
    x, y, _ = w.agent.pos
    hand = (x, y, REACH)
    d.move_subtree(AGENT, hand)
    _carry_to_hand(d, w, hand)


def _eff_push(d: _Draft, w: WorldGraph, t: str) -> None:
    n = w.node(t)
    d.detach(t)
    d.attach("OnTop", t, FLOOR)
    d.move_subtree(t, _on_top_pos(w.node(FLOOR), n.size, n.pos[:2]))


def _eff_operate(d: _Draft, w: WorldGraph, t: str) -> None:
    use = _device_use(w)
    if use is None:
        d.add_state(t, "on")
    elif use == "welds":
        d.add_state(t, "welded")
    elif use == "paints":
        d.add_state(t, "painted")
    elif use == "cuts":
        d.add_state(t, "cut")
    else:
        kind = use.split(":", 1)[1]
        held = w.node(w.held_id)
        d.add_state(t, "drilled" if held.has("can-operate") else "driven")
        d.edges.add(Edge("ConnectedTo", _fastener_on(w, t, kind), t))
        parent = w.parent(t)
        wall = _wall_near(w, t)
        if wall is not None and parent is not None and parent.dst == FLOOR:
            d.edges.add(Edge("ConnectedTo", t, wall))


def _eff_clean(d: _Draft, w: WorldGraph, t: str) -> None:
    d.drop_state(t, "dirty")


def _eff_release_material(d: _Draft, w: WorldGraph, t: str) -> None:
    d.add_state(t, "sticky")


def _eff_push_until_force(d: _Draft, w: WorldGraph, t: str) -> None:
    d.drop_state(t, "grabbed")
    d.edges.add(Edge("ConnectedTo", t, w.agent_at))
    x, y, z = w.agent.pos
    d.move_subtree(t, (x, y, z))


EFFECTS: Dict[str, EffectFn] = {
    "MoveTo": _eff_move_to,
    "Pick": _eff_pick,
    "Drop": _eff_drop,
    "Open": _eff_open,
    "Close": _eff_close,
    "SwitchOn": _eff_switch_on,
    "SwitchOff": _eff_switch_off,
    "ClimbUp": _eff_climb_up,
    "ClimbDown": _eff_climb_down,
    "Push": _eff_push,
    "Operate": _eff_operate,
    "Clean": _eff_clean,
    "ReleaseMaterial": _eff_release_material,
    "PushUntilForce": _eff_push_until_force,
}


# ====================================================================== public API

def check(action: SymbolicAction, w: WorldGraph) -> Optional[str]:
    """返回第一个失败的前提谓词；全部满足返回 None"""
    for object_id in action.args:
        w.node(object_id)
    return PRECONDITIONS[action.name](w, action.target)


def applicable(action: SymbolicAction, w: WorldGraph) -> bool:
    return check(action, w) is None


def apply(action: SymbolicAction, w: WorldGraph) -> WorldGraph:
    """执行动作，返回新的世界状态（w 不变）"""
    failed = check(action, w)
    if failed is not None:
        raise PreconditionViolation(str(action), failed)
    draft = _Draft(w)
    EFFECTS[action.name](draft, w, action.target)
    return draft.freeze()


def replay(actions: Iterable[SymbolicAction], w: WorldGraph) -> WorldGraph:
    for action in actions:
        w = apply(action, w)
    return w


def try_replay(actions: Iterable[SymbolicAction], w: WorldGraph) -> Optional[WorldGraph]:
    """重放计划；缺少物体或前提失败时返回 None"""
    try:
        return replay(actions, w)
    except (PreconditionViolation, ObjectLookupError):
        return None


def candidate_actions(w: WorldGraph) -> List[SymbolicAction]:
    """当前状态下全部可执行动作（固定顺序）"""
    out: List[SymbolicAction] = []
    ids = sorted(w.ids)
    for name in sorted(PRECONDITIONS):
        for object_id in ids:
            if name == "MoveTo" and object_id == w.agent_at:
                continue
            if PRECONDITIONS[name](w, object_id) is None:
                out.append(SymbolicAction(name, (object_id,)))
    return out


# ====================================================================== goal test

def _chain_has(w: WorldGraph, object_id: str, rel: str, target_token: str) -> bool:
    return any(e.rel == rel and w.node(e.dst).matches(target_token) for e in w.support_chain(object_id))


def subject_holds(c: Constraint, w: WorldGraph, object_id: str) -> bool:
    node = w.node(object_id)
    if c.kind == "inside":
        return "grabbed" not in node.states and _chain_has(w, object_id, "Inside", c.target)
    if c.kind == "ontop":
        return "grabbed" not in node.states and _chain_has(w, object_id, "OnTop", c.target)
    if c.kind == "connected":
        return any(w.node(dst).matches(c.target) for dst in w.connected_to(object_id))
    if c.kind == "state":
        present = bool(set(c.attributes) & node.states)
        return present == c.value
    raise ContractError(f"unknown constraint kind: {c.kind}")


def constraint_holds(c: Constraint, w: WorldGraph) -> bool:
    subjects = w.find(c.subject)
    if not subjects:
        return False
    results = (subject_holds(c, w, s) for s in subjects)
    return all(results) if c.quantifier == "all" else any(results)


def satisfied(goal: GoalSpec, w: WorldGraph) -> bool:
    return all(constraint_holds(c, w) for c in goal.constraints)


def action_cost(action: SymbolicAction, before: WorldGraph) -> float:
    """执行时间代理：固定动作代价 + MoveTo 行走时间"""
    cost = ActionConstants.COSTS[action.name]
    if action.name == "MoveTo":
        target = before.node(action.target)
        agent = before.agent
        walk = float(np.hypot(target.pos[0] - agent.pos[0], target.pos[1] - agent.pos[1]))
        cost += walk / WorldConstants.AGENT_SPEED
    return cost


def plan_cost(actions: Sequence[SymbolicAction], w: WorldGraph) -> float:
    total = 0.0
    for action in actions:
        total += action_cost(action, w)
        w = apply(action, w)
    return round(total, 6)


# ====================================================================== scene edits

def has_usable_fuel(w: WorldGraph, device: str) -> bool:
    return _has_usable_fuel(w, device)


def place_object(w: WorldGraph, object_id: str, rel: str, host_id: str, xy=None) -> WorldGraph:
    """把物体（连同承载的物体）放到 host 上或 host 内"""
    if rel not in SUPPORT_RELATIONS:
        raise ContractError(f"cannot place with relation {rel}")
    host = w.node(host_id)
    size = w.node(object_id).size
    draft = _Draft(w)
    draft.detach(object_id)
    draft.attach(rel, object_id, host_id)
    pos = _inside_pos(host, size, xy) if rel == "Inside" else _on_top_pos(host, size, xy)
    draft.move_subtree(object_id, pos)
    return draft.freeze()


def substitute_object(w: WorldGraph, old_id: str, new_node: ObjectNode) -> WorldGraph:
    """用新物体替换旧物体，保留其关系边与平面位置"""
    w.node(old_id)
    if new_node.id != old_id and w.has_node(new_node.id):
        raise ContractError(f"object id already present: {new_node.id}")

    def rename(object_id: Optional[str]) -> Optional[str]:
        return new_node.id if object_id == old_id else object_id

    nodes = [new_node if n.id == old_id else n for n in w.nodes]
    edges = frozenset(Edge(e.rel, rename(e.src), rename(e.dst)) for e in w.edges)
    world = w.replace_nodes(nodes, edges, agent_at=rename(w.agent_at))
    parent = world.parent(new_node.id)
    if parent is not None:
        world = place_object(world, new_node.id, parent.rel, parent.dst, new_node.pos[:2])
    return with_near(world)
