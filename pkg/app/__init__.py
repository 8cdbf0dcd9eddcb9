"""
ToolNet Pipeline Application Package
Tool prediction for goal-driven robot tasks over object-centric scene graphs
"""

__version__ = "1.0.0"
__description__ = "ToolNet pipeline: demonstrations, training, generalization tests, guided planning"
