"""
ToolNet Pipeline World Models
物体中心的世界状态：物体节点、关系边、目标与符号动作
"""

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Tuple

import numpy as np

from app.core.constants import ActionConstants, DomainConstants, WorldConstants
from app.core.error_handler import ContractError, ObjectLookupError

Vec3 = Tuple[float, float, float]


class Edge(NamedTuple):
    """关系边 (relation, src, dst)"""

    rel: str
    src: str
    dst: str


SUPPORT_RELATIONS = ("OnTop", "Inside")


@dataclass(frozen=True)
class ObjectNode:
    """场景中的一个物体实例"""

    id: str
    token: str
    pos: Vec3
    size: Vec3
    categories: Tuple[str, ...] = ()
    states: FrozenSet[str] = frozenset()
    flags: FrozenSet[str] = frozenset()
    functions: FrozenSet[str] = frozenset()
    capacity: Optional[Vec3] = None
    climb_height: float = 0.0
    goal_bit: int = 0

    @property
    def semantic_tokens(self) -> Tuple[str, ...]:
        return (self.token,) + tuple(self.categories)

    @property
    def is_tool(self) -> bool:
        return "is-tool" in self.flags

    def has(self, flag: str) -> bool:
        return flag in self.flags

    def does(self, function: str) -> bool:
        return function in self.functions

    def matches(self, token: str) -> bool:
        return token in self.semantic_tokens

    def state_vector(self) -> np.ndarray:
        return np.array([1.0 if a in self.states else 0.0 for a in WorldConstants.ATTRIBUTES])

    def fits_in(self, carrier: "ObjectNode") -> bool:
        """逐轴比较尺寸与承载容量"""
        if carrier.capacity is None:
            return True
        return all(s <= c for s, c in zip(self.size, carrier.capacity))

    def replace(self, **changes) -> "ObjectNode":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "class": self.token,
            "categories": list(self.categories),
            "states": sorted(self.states),
            "pos": [round(float(v), 6) for v in self.pos],
            "size": [float(v) for v in self.size],
            "flags": sorted(self.flags),
            "functions": sorted(self.functions),
            "capacity": list(self.capacity) if self.capacity is not None else None,
            "climb_height": self.climb_height,
            "goal_bit": self.goal_bit,
        }

    def __repr__(self) -> str:
        return f"<ObjectNode(id='{self.id}', class='{self.token}')>"


@dataclass(frozen=True)
class Constraint:
    """目标约束：inside / ontop / connected / state"""

    kind: str
    subject: str
    target: str = ""
    attributes: Tuple[str, ...] = ()
    value: bool = True
    quantifier: str = "all"

    def with_subject(self, subject: str) -> "Constraint":
        return dataclasses.replace(self, subject=subject)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "subject": self.subject,
            "target": self.target,
            "attributes": list(self.attributes),
            "value": self.value,
            "quantifier": self.quantifier,
        }


@dataclass(frozen=True)
class GoalSpec:
    """声明式目标"""

    domain: str
    goal_id: int
    text_tokens: Tuple[str, ...]
    object_tokens: Tuple[str, ...]
    constraints: Tuple[Constraint, ...]

    def __post_init__(self):
        missing = [t for t in self.object_tokens if t not in self.text_tokens]
        if missing:
            raise ContractError(f"goal object tokens not in goal text: {missing}")
        if not 1 <= self.goal_id <= 8:
            raise ContractError(f"goal id out of range: {self.goal_id}")

    @property
    def text(self) -> str:
        return " ".join(self.text_tokens)

    @property
    def subjects(self) -> Tuple[str, ...]:
        seen: List[str] = []
        for c in self.constraints:
            if c.subject not in seen:
                seen.append(c.subject)
        return tuple(seen)

    def mentions(self, node: ObjectNode) -> bool:
        return any(t in self.object_tokens for t in node.semantic_tokens)

    def replace_subject(self, old: str, new: str) -> "GoalSpec":
        """目标物体替换：同时更新文本、目标物体词与约束"""
        swap = lambda seq: tuple(new if t == old else t for t in seq)
        return GoalSpec(
            domain=self.domain,
            goal_id=self.goal_id,
            text_tokens=swap(self.text_tokens),
            object_tokens=swap(self.object_tokens),
            constraints=tuple(c.with_subject(new) if c.subject == old else c for c in self.constraints),
        )

    def to_dict(self) -> dict:
        return {
            "domain": self.domain,
            "goal_id": self.goal_id,
            "text": list(self.text_tokens),
            "objects": list(self.object_tokens),
            "constraints": [c.to_dict() for c in self.constraints],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GoalSpec":
        return cls(
            domain=data["domain"],
            goal_id=int(data["goal_id"]),
            text_tokens=tuple(data["text"]),
            object_tokens=tuple(data["objects"]),
            constraints=tuple(
                Constraint(
                    kind=c["kind"],
                    subject=c["subject"],
                    target=c.get("target", ""),
                    attributes=tuple(c.get("attributes", ())),
                    value=bool(c.get("value", True)),
                    quantifier=c.get("quantifier", "all"),
                )
                for c in data["constraints"]
            ),
        )


@dataclass(frozen=True)
class SymbolicAction:
    """符号动作，参数为物体 id"""

    name: str
    args: Tuple[str, ...]

    def __post_init__(self):
        arity = ActionConstants.ARITY.get(self.name)
        if arity is None:
            raise ContractError(f"unknown action: {self.name}")
        if len(self.args) != arity:
            raise ContractError(f"{self.name} takes {arity} argument(s), got {len(self.args)}")

    @property
    def target(self) -> str:
        return self.args[0]

    def __str__(self) -> str:
        return f"{self.name}({', '.join(self.args)})"

    @classmethod
    def parse(cls, text: str) -> "SymbolicAction":
        text = text.strip()
        if not text.endswith(")") or "(" not in text:
            raise ContractError(f"malformed action: {text!r}")
        name, rest = text[:-1].split("(", 1)
        args = tuple(a.strip() for a in rest.split(",") if a.strip())
        return cls(name.strip(), args)


@dataclass(frozen=True)
class WorldGraph:
    """场景图：节点 + 关系边；不可变，动作返回新状态"""

    domain: str
    seed: int
    nodes: Tuple[ObjectNode, ...]
    edges: FrozenSet[Edge]
    agent_at: Optional[str] = None
    removed: Tuple[str, ...] = field(default=())

    # ---------------------------------------------------------- indices

    @cached_property
    def index(self) -> Dict[str, ObjectNode]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def _parents(self) -> Dict[str, Edge]:
        return {e.src: e for e in self.edges if e.rel in SUPPORT_RELATIONS}

    @cached_property
    def _children(self) -> Dict[str, List[str]]:
        children: Dict[str, List[str]] = {}
        for e in sorted(self.edges):
            if e.rel in SUPPORT_RELATIONS:
                children.setdefault(e.dst, []).append(e.src)
        return children

    @cached_property
    def _connections(self) -> Dict[str, List[str]]:
        out: Dict[str, List[str]] = {}
        for e in self.edges:
            if e.rel == "ConnectedTo":
                out.setdefault(e.src, []).append(e.dst)
        return out

    # ---------------------------------------------------------- lookups

    def node(self, object_id: str) -> ObjectNode:
        try:
            return self.index[object_id]
        except KeyError:
            raise ObjectLookupError(object_id) from None

    def has_node(self, object_id: str) -> bool:
        return object_id in self.index

    @property
    def ids(self) -> List[str]:
        return [n.id for n in self.nodes]

    @property
    def agent(self) -> ObjectNode:
        return self.node(WorldConstants.AGENT_ID)

    @property
    def held_id(self) -> Optional[str]:
        for n in self.nodes:
            if "grabbed" in n.states:
                return n.id
        return None

    @property
    def climbed_on(self) -> Optional[str]:
        e = self._parents.get(WorldConstants.AGENT_ID)
        return e.dst if e is not None else None

    def parent(self, object_id: str) -> Optional[Edge]:
        return self._parents.get(object_id)

    def children(self, object_id: str) -> List[str]:
        return list(self._children.get(object_id, ()))

    def descendants(self, object_id: str) -> List[str]:
        out: List[str] = []
        stack = list(reversed(self.children(object_id)))
        while stack:
            current = stack.pop()
            out.append(current)
            stack.extend(reversed(self.children(current)))
        return out

    def support_chain(self, object_id: str) -> List[Edge]:
        chain: List[Edge] = []
        current = self._parents.get(object_id)
        while current is not None and len(chain) <= len(self.nodes):
            chain.append(current)
            current = self._parents.get(current.dst)
        return chain

    def connected_to(self, object_id: str) -> List[str]:
        return list(self._connections.get(object_id, ()))

    def is_near(self, a: str, b: str) -> bool:
        return Edge("Near", a, b) in self.edges

    def enclosing_closed(self, object_id: str) -> List[str]:
        """从外到内列出包住该物体、且处于关闭状态的容器"""
        closed = [
            e.dst for e in self.support_chain(object_id)
            if e.rel == "Inside" and self.node(e.dst).has("can-open") and "open" not in self.node(e.dst).states
        ]
        return list(reversed(closed))

    def is_outdoor(self, object_id: Optional[str]) -> bool:
        if object_id is None:
            return False
        if self.node(object_id).does("outdoor"):
            return True
        return any(self.node(e.dst).does("outdoor") for e in self.support_chain(object_id))

    def find(self, token: str) -> List[str]:
        """语义词匹配的物体 id（不含机器人）"""
        return [
            n.id for n in self.nodes
            if n.id != WorldConstants.AGENT_ID and n.matches(token)
        ]

    def tokens(self) -> FrozenSet[str]:
        return frozenset(n.token for n in self.nodes)

    def distance(self, a: str, b: str, planar: bool = False) -> float:
        pa, pb = np.array(self.node(a).pos), np.array(self.node(b).pos)
        if planar:
            pa, pb = pa[:2], pb[:2]
        return float(np.linalg.norm(pa - pb))

    def edges_of(self, rel: str) -> List[Edge]:
        return sorted(e for e in self.edges if e.rel == rel)

    # ---------------------------------------------------------- updates

    def with_goal(self, goal: Optional[GoalSpec]) -> "WorldGraph":
        """按目标提及重新设置 goal bit"""
        nodes = tuple(
            n.replace(goal_bit=int(goal is not None and goal.mentions(n))) for n in self.nodes
        )
        return dataclasses.replace(self, nodes=nodes)

    def replace_nodes(self, nodes: Iterable[ObjectNode], edges: Optional[FrozenSet[Edge]] = None,
                      **changes) -> "WorldGraph":
        return dataclasses.replace(
            self, nodes=tuple(nodes), edges=self.edges if edges is None else frozenset(edges), **changes
        )

    def permuted(self, order: List[int]) -> "WorldGraph":
        return dataclasses.replace(self, nodes=tuple(self.nodes[i] for i in order))

    # ---------------------------------------------------------- checks

    def validate(self) -> None:
        """检查图不变量，违反时抛出 ContractError"""
        ids = self.ids
        if len(set(ids)) != len(ids):
            raise ContractError("duplicate node ids")
        if WorldConstants.AGENT_ID not in self.index:
            raise ContractError("agent node missing")
        inside_count: Dict[str, int] = {}
        for e in self.edges:
            if e.rel not in WorldConstants.RELATIONS:
                raise ContractError(f"unknown relation {e.rel}")
            if e.src not in self.index or e.dst not in self.index:
                raise ContractError(f"dangling edge {e}")
            if e.src == e.dst:
                raise ContractError(f"self edge {e}")
            if e.rel == "Near" and Edge("Near", e.dst, e.src) not in self.edges:
                raise ContractError(f"asymmetric Near edge {e}")
            if e.rel == "Inside":
                inside_count[e.src] = inside_count.get(e.src, 0) + 1
        if any(count > 1 for count in inside_count.values()):
            raise ContractError("object inside more than one container")
        tools = set(DomainConstants.TOOLS.get(self.domain, ()))
        for n in self.nodes:
            if min(n.size) <= 0:
                raise ContractError(f"non-positive size for {n.id}")
            if n.token in tools and not n.is_tool:
                raise ContractError(f"{n.id} should carry the tool flag")
        if self.agent_at is not None and self.agent_at not in self.index:
            raise ContractError(f"agent location {self.agent_at} missing")

    def to_dict(self) -> dict:
        return {
            "domain": self.domain,
            "seed": self.seed,
            "agent_at": self.agent_at,
            "removed": list(self.removed),
            "nodes": [n.to_dict() for n in sorted(self.nodes, key=lambda n: n.id)],
            "edges": [{"type": e.rel, "src": e.src, "dst": e.dst} for e in sorted(self.edges)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WorldGraph":
        nodes = tuple(
            ObjectNode(
                id=n["id"],
                token=n["class"],
                pos=tuple(float(v) for v in n["pos"]),
                size=tuple(float(v) for v in n["size"]),
                categories=tuple(n.get("categories", ())),
                states=frozenset(n.get("states", ())),
                flags=frozenset(n.get("flags", ())),
                functions=frozenset(n.get("functions", ())),
                capacity=tuple(n["capacity"]) if n.get("capacity") is not None else None,
                climb_height=float(n.get("climb_height", 0.0)),
                goal_bit=int(n.get("goal_bit", 0)),
            )
            for n in data["nodes"]
        )
        edges = frozenset(Edge(e["type"], e["src"], e["dst"]) for e in data["edges"])
        return cls(
            domain=data["domain"],
            seed=int(data["seed"]),
            nodes=nodes,
            edges=edges,
            agent_at=data.get("agent_at"),
            removed=tuple(data.get("removed", ())),
        )

    def __repr__(self) -> str:
        return f"<WorldGraph(domain='{self.domain}', seed={self.seed}, nodes={len(self.nodes)})>"
