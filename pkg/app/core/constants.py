"""
ToolNet Pipeline Constants
统一常量定义：属性、关系、动作、物体词表、目标与替换表
"""

from typing import Dict, List, Tuple


class WorldConstants:
    """世界模型相关常量"""

    # 固定顺序的属性位向量 l_v
    ATTRIBUTES: Tuple[str, ...] = (
        "grabbed", "inside", "on", "open", "sticky", "dirty",
        "welded", "drilled", "driven", "cut", "painted",
    )

    RELATIONS: Tuple[str, ...] = ("OnTop", "Inside", "ConnectedTo", "Near")

    # 节点标志位
    FLAGS: Tuple[str, ...] = (
        "is-tool", "is-movable", "is-surface", "can-open", "can-operate",
        "can-climb", "is-container", "is-cleaning-agent",
    )

    FLOOR_EXTENT = 10.0       # 米
    SIZE_SCALE = 2.0          # 尺寸归一化
    GRID_RESOLUTION = 0.1
    NEAR_THRESHOLD = 1.0
    AGENT_REACH = 0.9         # 手部高度
    AGENT_SPEED = 0.5         # 米/秒，用于 MoveTo 耗时
    AGENT_ID = "robot"
    FLOOR_ID = "floor"
    FURNITURE_MIN_GAP = 1.6
    PLACEMENT_JITTER = 0.3
    TOOL_OMISSION_PROB = 0.2

    # 空间延展物体不参与 Near
    EXTENDED_TOKENS = frozenset({"floor", "wall"})


class ActionConstants:
    """动作相关常量"""

    # 动作别名 -> 实现的动作名
    ACTION_GROUPS: Dict[str, Tuple[str, ...]] = {
        "Push": ("Push",),
        "Climb up/down": ("ClimbUp", "ClimbDown"),
        "Open/Close": ("Open", "Close"),
        "Switch on/off": ("SwitchOn", "SwitchOff"),
        "Drop": ("Drop",),
        "Pick": ("Pick",),
        "Move to": ("MoveTo",),
        "Operate device": ("Operate",),
        "Clean": ("Clean",),
        "Release material on surface": ("ReleaseMaterial",),
        "Push until force": ("PushUntilForce",),
    }

    ARITY: Dict[str, int] = {
        name: 1 for names in ACTION_GROUPS.values() for name in names
    }

    # 执行时间代理（秒），MoveTo 另加行走时间
    COSTS: Dict[str, float] = {
        "MoveTo": 2.0,
        "Pick": 1.0,
        "Drop": 1.0,
        "Open": 1.5,
        "Close": 1.5,
        "SwitchOn": 0.5,
        "SwitchOff": 0.5,
        "ClimbUp": 2.0,
        "ClimbDown": 2.0,
        "Push": 1.5,
        "Operate": 3.0,
        "Clean": 4.0,
        "ReleaseMaterial": 2.0,
        "PushUntilForce": 2.0,
    }


# 物体类别规格：尺寸、类别词、标志、功能、容量、攀爬高度、初始状态
OBJECT_SPECS: Dict[str, dict] = {
    # --- 结构 ---
    "floor": dict(size=(10.0, 10.0, 0.01), flags=("is-surface",)),
    "wall": dict(size=(10.0, 0.1, 3.0), functions=("wall",)),
    "door": dict(size=(0.1, 1.0, 2.0), flags=("can-open",), functions=("door",)),
    # --- 家居家具 ---
    "fridge": dict(size=(0.8, 0.7, 2.0), flags=("is-surface", "can-open", "is-container")),
    "cupboard": dict(size=(1.0, 0.5, 1.2), flags=("is-surface", "can-open", "is-container")),
    "table": dict(size=(1.6, 0.9, 0.8), flags=("is-surface",)),
    "couch": dict(size=(2.0, 0.9, 0.8), flags=("is-surface",)),
    "shelf": dict(size=(1.0, 0.4, 2.0), flags=("is-surface",)),
    "dumpster": dict(size=(1.0, 1.0, 1.2), flags=("can-open", "is-container"), functions=("outdoor",)),
    "light-switch": dict(size=(0.1, 0.05, 0.1), categories=("light",), flags=("can-operate",),
                         functions=("switch",)),
    "dirt": dict(size=(0.5, 0.5, 0.01), states=("dirty",)),
    # --- 工厂家具 ---
    "worktable": dict(size=(1.8, 0.9, 0.9), flags=("is-surface",)),
    "platform": dict(size=(2.0, 2.0, 0.3), flags=("is-surface",)),
    "long-shelf": dict(size=(2.5, 0.5, 2.0), flags=("is-surface",)),
    "assembly-station": dict(size=(1.5, 1.0, 0.9), flags=("is-surface",)),
    "generator": dict(size=(1.0, 0.8, 1.0), flags=("can-operate", "is-container"),
                      functions=("device", "fuel-tank")),
    "3d-printer": dict(size=(0.6, 0.6, 1.0), flags=("can-operate",), functions=("device",)),
    "water": dict(size=(1.0, 1.0, 0.01), states=("dirty",)),
    "oil": dict(size=(0.8, 0.8, 0.01), states=("dirty",)),
    # --- 工具 ---
    "big-tray": dict(size=(0.7, 0.5, 0.05), flags=("is-movable", "is-surface"),
                     functions=("carrier",), capacity=(0.6, 0.45, 0.3)),
    "tray": dict(size=(0.5, 0.35, 0.04), flags=("is-movable", "is-surface"),
                 functions=("carrier",), capacity=(0.45, 0.3, 0.3)),
    "box": dict(size=(0.75, 0.55, 0.45), flags=("is-movable", "can-open", "is-container"),
                functions=("carrier",), capacity=(0.7, 0.5, 0.4)),
    "toolbox": dict(size=(0.55, 0.3, 0.25), flags=("is-movable", "can-open", "is-container"),
                    functions=("carrier",), capacity=(0.5, 0.25, 0.2)),
    "trolley": dict(size=(0.9, 0.6, 0.3), flags=("is-movable", "is-surface"),
                    functions=("carrier",), capacity=(0.8, 0.6, 0.8)),
    "lift": dict(size=(1.1, 1.1, 0.2), flags=("is-movable", "is-surface"),
                 functions=("carrier",), capacity=(1.0, 1.0, 1.0)),
    "book": dict(size=(0.25, 0.2, 0.05), categories=("weight",), flags=("is-movable", "is-surface")),
    "brick": dict(size=(0.2, 0.1, 0.06), categories=("weight",), flags=("is-movable",),
                  functions=("drives:nail",)),
    "chair": dict(size=(0.5, 0.5, 0.9), flags=("is-movable", "is-surface", "can-climb"), climb_height=0.45),
    "stool": dict(size=(0.4, 0.4, 0.6), flags=("is-movable", "can-climb"), climb_height=0.6),
    "ladder": dict(size=(0.5, 0.2, 1.8), flags=("is-movable", "can-climb"), climb_height=0.9),
    "ramp": dict(size=(1.2, 0.6, 0.5), flags=("is-movable", "can-climb"), climb_height=0.5),
    "stick": dict(size=(1.2, 0.05, 0.05), flags=("is-movable",), functions=("pusher",)),
    "glue": dict(size=(0.05, 0.05, 0.15), flags=("is-movable",), functions=("adhesive",)),
    "tape": dict(size=(0.1, 0.1, 0.05), flags=("is-movable",), functions=("adhesive",)),
    "mop": dict(size=(0.3, 0.3, 1.3), flags=("is-movable", "is-cleaning-agent"),
                functions=("cleans:dirt", "cleans:water", "cleans:oil")),
    "sponge": dict(size=(0.12, 0.08, 0.05), flags=("is-movable", "is-cleaning-agent"),
                   functions=("cleans:dirt", "cleans:water")),
    "vacuum": dict(size=(0.4, 0.4, 1.0), flags=("is-movable", "is-cleaning-agent"),
                   functions=("cleans:dirt",)),
    "blow-dryer": dict(size=(0.25, 0.1, 0.25), flags=("is-movable", "can-operate", "is-cleaning-agent"),
                       functions=("cleans:water",)),
    "drill": dict(size=(0.25, 0.08, 0.2), flags=("is-movable", "can-operate"), functions=("drives:screw",)),
    "hammer": dict(size=(0.3, 0.1, 0.04), flags=("is-movable",), functions=("drives:nail",)),
    "screwdriver": dict(size=(0.2, 0.03, 0.03), flags=("is-movable",), functions=("drives:screw",)),
    "welder": dict(size=(0.4, 0.3, 0.3), flags=("is-movable", "can-operate"), functions=("welds",)),
    "spraypaint": dict(size=(0.07, 0.07, 0.2), flags=("is-movable", "can-operate"), functions=("paints",)),
    "wood-cutter": dict(size=(0.4, 0.2, 0.2), flags=("is-movable", "can-operate"), functions=("cuts",)),
    "gasoline": dict(size=(0.3, 0.2, 0.35), flags=("is-movable",), functions=("fuel",)),
    "coal": dict(size=(0.3, 0.3, 0.2), flags=("is-movable",), functions=("fuel",)),
    "wood": dict(size=(0.5, 0.1, 0.1), flags=("is-movable",), functions=("fuel", "needs-cut")),
    # --- 其他可移动物体 ---
    "paper": dict(size=(0.3, 0.21, 0.01), flags=("is-movable", "is-surface")),
    "cube": dict(size=(0.08, 0.08, 0.08), categories=("cube", "weight"), flags=("is-movable",)),
    "bottle": dict(size=(0.08, 0.08, 0.25), categories=("bottle", "weight"), flags=("is-movable",)),
    "apple": dict(size=(0.08, 0.08, 0.08), categories=("fruit",), flags=("is-movable",)),
    "banana": dict(size=(0.18, 0.05, 0.05), categories=("fruit",), flags=("is-movable",)),
    "milk-carton": dict(size=(0.1, 0.1, 0.25), categories=("milk",), flags=("is-movable",)),
    "crate": dict(size=(0.5, 0.4, 0.4), categories=("crate",), flags=("is-movable", "is-surface")),
    "board": dict(size=(1.0, 0.5, 0.03), flags=("is-movable", "is-surface")),
    "screw": dict(size=(0.02, 0.02, 0.05), categories=("fastener",), flags=("is-movable",)),
    "nail": dict(size=(0.02, 0.02, 0.06), categories=("fastener",), flags=("is-movable",)),
    "spare-parts": dict(size=(0.3, 0.3, 0.2), categories=("parts",), flags=("is-movable", "is-surface")),
    # --- 泛化测试用物体 ---
    "orange": dict(size=(0.09, 0.09, 0.09), categories=("fruit",), flags=("is-movable",)),
    "guava": dict(size=(0.07, 0.07, 0.07), categories=("fruit",), flags=("is-movable",)),
    "pillow": dict(size=(0.65, 0.45, 0.25), flags=("is-movable",)),
    "can": dict(size=(0.07, 0.07, 0.12), categories=("weight",), flags=("is-movable",)),
    "jar": dict(size=(0.1, 0.1, 0.15), categories=("weight",), flags=("is-movable",)),
    "barrel": dict(size=(0.6, 0.6, 0.9), flags=("is-movable",)),
    "bolt": dict(size=(0.02, 0.02, 0.06), categories=("fastener",), flags=("is-movable",)),
    "washer": dict(size=(0.03, 0.03, 0.005), categories=("fastener",), flags=("is-movable",)),
    "pipe": dict(size=(0.8, 0.05, 0.05), flags=("is-movable",)),
}


# 语义放置先验：("OnTop"|"Inside", host) 或 ("floor",)
HOME_PLACEMENTS: Dict[str, List[tuple]] = {
    "apple": [("OnTop", "table"), ("Inside", "fridge"), ("OnTop", "couch")],
    "banana": [("OnTop", "table"), ("Inside", "fridge"), ("OnTop", "couch")],
    "milk-carton": [("OnTop", "table"), ("OnTop", "shelf"), ("OnTop", "fridge")],
    "cube": [("OnTop", "table"), ("OnTop", "couch"), ("floor",)],
    "bottle": [("OnTop", "table"), ("floor",), ("OnTop", "couch")],
    "paper": [("OnTop", "table"), ("floor",)],
    "tray": [("OnTop", "table"), ("OnTop", "couch"), ("floor",)],
    "big-tray": [("floor",), ("OnTop", "couch"), ("OnTop", "table")],
    "box": [("floor",)],
    "book": [("OnTop", "table"), ("OnTop", "shelf"), ("OnTop", "couch")],
    "chair": [("floor",)],
    "stool": [("floor",)],
    "stick": [("floor",)],
    "glue": [("OnTop", "table"), ("OnTop", "couch")],
    "tape": [("OnTop", "table"), ("OnTop", "couch")],
    "mop": [("floor",)],
    "sponge": [("OnTop", "table"), ("floor",)],
    "vacuum": [("floor",)],
    "dirt": [("floor",)],
}

FACTORY_PLACEMENTS: Dict[str, List[tuple]] = {
    "crate": [("floor",)],
    "board": [("floor",), ("OnTop", "worktable")],
    "paper": [("OnTop", "worktable"), ("floor",)],
    "screw": [("OnTop", "long-shelf"), ("Inside", "cupboard"), ("floor",)],
    "nail": [("OnTop", "long-shelf"), ("Inside", "cupboard"), ("floor",)],
    "spare-parts": [("OnTop", "worktable"), ("floor",), ("OnTop", "long-shelf")],
    "ramp": [("floor",)],
    "lift": [("floor",)],
    "trolley": [("floor",)],
    "tray": [("OnTop", "worktable"), ("floor",)],
    "box": [("floor",)],
    "toolbox": [("floor",), ("OnTop", "worktable")],
    "stick": [("floor",)],
    "ladder": [("floor",)],
    "stool": [("floor",)],
    "drill": [("OnTop", "worktable"), ("Inside", "cupboard")],
    "hammer": [("OnTop", "worktable"), ("Inside", "cupboard"), ("floor",)],
    "screwdriver": [("OnTop", "worktable"), ("Inside", "cupboard")],
    "welder": [("floor",), ("OnTop", "worktable")],
    "spraypaint": [("OnTop", "worktable"), ("Inside", "cupboard")],
    "wood-cutter": [("OnTop", "worktable"), ("floor",)],
    "blow-dryer": [("OnTop", "worktable"), ("Inside", "cupboard")],
    "mop": [("floor",)],
    "glue": [("OnTop", "worktable"), ("Inside", "cupboard")],
    "tape": [("OnTop", "worktable"), ("Inside", "cupboard")],
    "gasoline": [("floor",), ("Inside", "generator")],
    "coal": [("floor",), ("Inside", "generator")],
    "wood": [("floor",), ("OnTop", "worktable")],
    "brick": [("floor",)],
    "water": [("floor",)],
    "oil": [("floor",)],
}


class DomainConstants:
    """Home / Factory 领域定义"""

    DOMAINS: Tuple[str, ...] = ("home", "factory")

    # (token, count)；家具按列表顺序在地面上放置
    FURNITURE: Dict[str, Tuple[str, ...]] = {
        "home": ("fridge", "cupboard", "table", "couch", "shelf"),
        "factory": ("worktable", "platform", "long-shelf", "cupboard", "generator",
                    "assembly-station", "3d-printer"),
    }

    ITEMS: Dict[str, Tuple[Tuple[str, int], ...]] = {
        "home": (
            ("big-tray", 1), ("tray", 1), ("book", 1), ("box", 1), ("chair", 1),
            ("stick", 1), ("glue", 1), ("tape", 1), ("stool", 1), ("mop", 1),
            ("sponge", 1), ("vacuum", 1), ("paper", 1), ("cube", 3), ("bottle", 2),
            ("apple", 1), ("banana", 1), ("milk-carton", 1), ("dirt", 1),
        ),
        "factory": (
            ("ramp", 1), ("lift", 1), ("trolley", 1), ("tray", 1), ("box", 1),
            ("toolbox", 1), ("stick", 1), ("ladder", 1), ("stool", 1), ("drill", 1),
            ("hammer", 1), ("screwdriver", 1), ("welder", 1), ("spraypaint", 1),
            ("wood-cutter", 1), ("blow-dryer", 1), ("mop", 1), ("glue", 1), ("tape", 1),
            ("gasoline", 1), ("coal", 1), ("wood", 1), ("brick", 1), ("crate", 2),
            ("board", 1), ("paper", 1), ("screw", 1), ("nail", 1), ("spare-parts", 1),
            ("water", 1), ("oil", 1),
        ),
    }

    # 可作为工具的物体
    TOOLS: Dict[str, Tuple[str, ...]] = {
        "home": ("big-tray", "book", "box", "chair", "glue", "mop", "sponge", "stick",
                 "stool", "tape", "tray", "vacuum"),
        "factory": ("blow-dryer", "box", "brick", "coal", "drill", "gasoline",
                    "glue", "hammer", "ladder", "lift", "mop", "ramp", "screwdriver",
                    "spraypaint", "stick", "stool", "tape", "toolbox", "tray", "trolley",
                    "welder", "wood", "wood-cutter"),
    }

    # 每组至少保留一个，保证每个目标可达
    REQUIRED_GROUPS: Dict[str, Tuple[Tuple[str, ...], ...]] = {
        "home": (("mop", "sponge", "vacuum"), ("glue", "tape"), ("stool", "chair")),
        "factory": (("glue", "tape"), ("mop",), ("spraypaint",), ("welder", "screwdriver", "drill"),
                    ("gasoline", "coal"), ("ladder", "stool", "ramp"), ("hammer", "brick")),
    }

    PLACEMENTS: Dict[str, Dict[str, List[tuple]]] = {
        "home": HOME_PLACEMENTS,
        "factory": FACTORY_PLACEMENTS,
    }

    HAS_DOOR: Dict[str, bool] = {"home": True, "factory": False}
    # 离地高度可选：低处无需攀爬，高处需要
    SWITCH_HEIGHTS: Tuple[float, ...] = (1.2, 2.0)


# 目标：文本词、目标物体词、约束
# 约束: ("inside"|"ontop"|"connected", subject, target, quantifier)
#       ("state", subject, attributes, value, quantifier)
GOALS: Dict[str, List[dict]] = {
    "home": [
        dict(goal_id=1, text="place milk in fridge", objects=("milk", "fridge"),
             constraints=[("inside", "milk", "fridge", "all")]),
        dict(goal_id=2, text="put fruit in cupboard", objects=("fruit", "cupboard"),
             constraints=[("inside", "fruit", "cupboard", "all")]),
        dict(goal_id=3, text="remove dirt from floor", objects=("dirt", "floor"),
             constraints=[("state", "dirt", ("dirty",), False, "all")]),
        dict(goal_id=4, text="stick paper to wall", objects=("paper", "wall"),
             constraints=[("connected", "paper", "wall", "all")]),
        dict(goal_id=5, text="put cube in box", objects=("cube", "box"),
             constraints=[("inside", "cube", "box", "all")]),
        dict(goal_id=6, text="place bottle in dumpster", objects=("bottle", "dumpster"),
             constraints=[("inside", "bottle", "dumpster", "all")]),
        dict(goal_id=7, text="place a weight on paper", objects=("weight", "paper"),
             constraints=[("ontop", "weight", "paper", "any")]),
        dict(goal_id=8, text="illuminate the room", objects=("room",),
             constraints=[("state", "light-switch", ("on",), True, "all")]),
    ],
    "factory": [
        dict(goal_id=1, text="stack crate on platform", objects=("crate", "platform"),
             constraints=[("ontop", "crate", "platform", "all")]),
        dict(goal_id=2, text="stick paper to wall", objects=("paper", "wall"),
             constraints=[("connected", "paper", "wall", "all")]),
        dict(goal_id=3, text="fix board on wall", objects=("board", "wall"),
             constraints=[("connected", "board", "wall", "all")]),
        dict(goal_id=4, text="turn the generator on", objects=("generator",),
             constraints=[("state", "generator", ("on",), True, "all")]),
        dict(goal_id=5, text="assemble and paint parts", objects=("parts",),
             constraints=[("ontop", "parts", "assembly-station", "all"),
                          ("state", "parts", ("welded", "driven", "drilled"), True, "all"),
                          ("state", "parts", ("painted",), True, "all")]),
        dict(goal_id=6, text="move fastener to worktable", objects=("fastener", "worktable"),
             constraints=[("ontop", "fastener", "worktable", "all")]),
        dict(goal_id=7, text="clean spilled water", objects=("water",),
             constraints=[("state", "water", ("dirty",), False, "all")]),
        dict(goal_id=8, text="clean spilled oil", objects=("oil",),
             constraints=[("state", "oil", ("dirty",), False, "all")]),
    ],
}


class GenTestConstants:
    """泛化测试替换表"""

    TYPES: Tuple[str, ...] = ("I", "II", "III", "IV", "V")

    # 训练场景中从未出现的候选替代工具（最近邻在此集合中选择）
    ALTERNATE_TOOLS: Tuple[str, ...] = (
        "crate", "basket", "bucket", "cart", "container",
        "seat", "step-ladder", "bench",
        "broom", "duster", "rag", "towel",
        "adhesive", "paste", "stapler",
        "mallet", "wrench",
        "diesel", "charcoal", "petrol",
        "rod", "pole",
        "brush", "torch", "saw", "dumbbell", "paperweight",
    )

    # 与任务无关的替换物
    UNRELATED_OBJECTS: Tuple[str, ...] = ("headphone", "clock", "plant", "remote")

    # Type V: 目标物体类别词 -> 可替换的新物体
    GOAL_OBJECT_REPLACEMENTS: Dict[str, Dict[str, Tuple[str, ...]]] = {
        "home": {"fruit": ("orange", "guava", "pillow"), "bottle": ("can", "jar")},
        "factory": {"fastener": ("bolt", "washer", "pipe"), "crate": ("barrel",)},
    }


NO_TOOL = "no-tool"
