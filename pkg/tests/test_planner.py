import numpy as np
import pytest

from app.core.constants import NO_TOOL
from app.core.error_handler import ContractError
from app.models.toolnet import ToolDistribution, ToolNet
from app.models.world_models import SymbolicAction
from app.schemas.result_schemas import SearchRecord
from app.services.dataset_service import scene_cache, tool_vocab
from app.services.planner_service import (
    compare,
    effective_branching_factor,
    search,
    select_pairs,
    state_key,
    summarize,
)
from app.services.world_service import goal_by_id, replay, satisfied

from tests.conftest import small_ablation
from tests.test_world import CUBE_PLAN


def test_branching_factor_known_values():
    assert effective_branching_factor(6, 1) == pytest.approx(5.0, abs=1e-6)
    assert effective_branching_factor(7, 2) == pytest.approx(2.0, abs=1e-6)
    assert effective_branching_factor(1, 0) == 0.0


def test_branching_factor_deep_trees_stay_finite():
    b = effective_branching_factor(50000, 80)
    assert 1.0 < b < 1.2
    assert abs(sum(b ** i for i in range(1, 81)) - 49999) <= 1e-6 * 50000
    assert effective_branching_factor(10 ** 6, 400) > 1.0


def test_branching_factor_solves_tree_size(rng):
    for _ in range(1000):
        n = int(rng.integers(2, 10001))
        d = int(rng.integers(1, 7))
        b = effective_branching_factor(n, d)
        assert b > 0
        assert abs(sum(b ** i for i in range(1, d + 1)) - (n - 1)) <= 1e-6 * n


@pytest.mark.parametrize("nodes, depth", [(0, 1), (2, 0), (5, -1)])
def test_branching_factor_rejects_bad_inputs(nodes, depth):
    with pytest.raises(ContractError):
        effective_branching_factor(nodes, depth)


def test_uninformed_search_finds_shortest_plan(world, cube_goal):
    stats = search(world, cube_goal, "uninformed", budget=5000)
    assert stats.found
    assert stats.depth == len(CUBE_PLAN)
    assert satisfied(cube_goal, replay(stats.plan, world))
    record = stats.to_record("home", cube_goal.goal_id, world.seed)
    assert record.branching_factor == pytest.approx(
        effective_branching_factor(stats.nodes_expanded, len(CUBE_PLAN))
    )


def test_satisfied_start_needs_no_search(world, cube_goal):
    done = replay(CUBE_PLAN, world)
    stats = search(done, cube_goal, "uninformed", budget=10)
    assert stats.found
    assert stats.depth == 0
    assert stats.nodes_expanded == 1
    assert stats.branching_factor == 0.0


def test_guided_search_returns_a_valid_plan(world, cube_goal, provider):
    model = ToolNet(small_ablation("nt"), tool_vocab("home"), seed=0)
    stats = search(world, cube_goal, "guided", budget=5000, model=model, provider=provider)
    assert stats.found
    assert stats.model_queries >= 1
    assert satisfied(cube_goal, replay(stats.plan, world))


def test_exhausted_budget_is_not_found(world, cube_goal):
    stats = search(world, cube_goal, "uninformed", budget=2)
    assert not stats.found
    assert stats.depth is None
    assert stats.branching_factor is None


def test_search_contract(world, cube_goal):
    with pytest.raises(ContractError):
        search(world, cube_goal, "uninformed", budget=0)
    with pytest.raises(ContractError):
        search(world, cube_goal, "astar", budget=10)
    with pytest.raises(ContractError):
        search(world, cube_goal, "guided", budget=10)


def test_state_key_ignores_near_edges(world):
    bare = world.replace_nodes(world.nodes, frozenset(e for e in world.edges if e.rel != "Near"))
    assert bare.edges != world.edges
    assert state_key(bare) == state_key(world)


def record(goal_id, mode, found, nodes, depth=None):
    return SearchRecord(
        domain="home", goal_id=goal_id, scene_seed=7, mode=mode, found=found,
        nodes_expanded=nodes, depth=depth,
        branching_factor=effective_branching_factor(nodes, depth) if found else None,
        wall_time=0.0,
    )


def test_summary_counts_pruned_pairs():
    records = [
        record(1, "uninformed", True, 100, 2),
        record(1, "guided", True, 40, 2),
        record(2, "uninformed", True, 100, 2),
        record(2, "guided", True, 80, 2),
        record(3, "uninformed", False, 500),
        record(3, "guided", True, 10, 2),
    ]
    summary = summarize("home", records)
    assert summary.pairs == 3
    assert summary.pruned_pairs == 1
    assert summary.pruned_fraction == pytest.approx(1 / 3)
    assert summary.found == {"uninformed": 2, "guided": 3}
    assert summary.nodes_mean["uninformed"] == pytest.approx(np.mean([100, 100, 500]))


class FixedToolPrior:
    """每个状态都返回同一分布的模型替身"""

    def __init__(self, likelihoods):
        self.dist = ToolDistribution(
            tuple(likelihoods) + (NO_TOOL,),
            np.array(list(likelihoods.values()) + [0.99]),
        )

    def predict(self, w, goal, provider):
        return self.dist


def test_unlikely_tools_are_pruned(world, cube_goal, provider):
    uninformed = search(world, cube_goal, "uninformed", budget=5000)
    guided = search(world, cube_goal, "guided", budget=5000, model=FixedToolPrior({"tray": 0.01}), provider=provider)
    assert guided.found and uninformed.found
    assert guided.depth == uninformed.depth
    assert guided.nodes_expanded < uninformed.nodes_expanded
    assert not any(a.target == "tray" for a in guided.plan)


@pytest.mark.slow
def test_trained_model_prunes_most_pairs(scaled_config, scaled_model):
    config = scaled_config.model_copy(update={"planner_pairs": 10, "planner_budget": 20000})
    pairs = select_pairs(config, "home")
    model, provider = scaled_model("w")
    records = compare(pairs, config, model, provider)
    for r in records:
        goal = goal_by_id("home", r.goal_id)
        start = scene_cache.get("home", r.scene_seed).with_goal(goal)
        assert not r.found or satisfied(goal, replay([SymbolicAction.parse(a) for a in r.plan], start))
    summary = summarize("home", records)
    assert summary.found["guided"] == summary.pairs
    assert summary.nodes_mean["guided"] < summary.nodes_mean["uninformed"]
    assert summary.pruned_fraction >= 0.8
