"""
ToolNet Pipeline Models Package
统一导入世界模型、自动微分与 ToolNet 模型
"""

from .world_models import Constraint, Edge, GoalSpec, ObjectNode, SymbolicAction, WorldGraph
from .autodiff import DTensor, Adam, SGD
from .toolnet import ABLATION_LADDER, AblationConfig, GraphInput, ToolDistribution, ToolNet, argmax_tool

__all__ = [
    "Constraint",
    "Edge",
    "GoalSpec",
    "ObjectNode",
    "SymbolicAction",
    "WorldGraph",
    "DTensor",
    "Adam",
    "SGD",
    "ABLATION_LADDER",
    "AblationConfig",
    "GraphInput",
    "ToolDistribution",
    "ToolNet",
    "argmax_tool",
]
