import numpy as np
import pytest

from app.core.error_handler import ContractError, ObjectLookupError, PreconditionViolation
from app.core.constants import ActionConstants, DomainConstants
from app.models.world_models import Edge, GoalSpec, SymbolicAction, WorldGraph
from app.schemas.world_schemas import GoalDocument, SceneDocument
from app.services.world_service import (
    EFFECTS,
    PRECONDITIONS,
    apply,
    applicable,
    candidate_actions,
    check,
    goals_for,
    make_scene,
    place_object,
    plan_cost,
    remove_objects,
    replay,
    satisfied,
    try_replay,
)

CUBE_PLAN = [
    SymbolicAction("MoveTo", ("cube",)),
    SymbolicAction("Pick", ("cube",)),
    SymbolicAction("MoveTo", ("box",)),
    SymbolicAction("Drop", ("cube",)),
]


@pytest.mark.parametrize("domain", DomainConstants.DOMAINS)
def test_scenes_are_deterministic_and_valid(domain):
    for seed in (7, 8, 9):
        a = make_scene(domain, seed)
        a.validate()
        assert a.to_dict() == make_scene(domain, seed).to_dict()
        SceneDocument.model_validate(a.to_dict())
    assert make_scene(domain, 7).to_dict() != make_scene(domain, 8).to_dict()


def test_scene_round_trips_through_dict(home_scene):
    restored = WorldGraph.from_dict(home_scene.to_dict())
    assert restored.to_dict() == home_scene.to_dict()


def test_every_domain_has_eight_goals():
    for domain in DomainConstants.DOMAINS:
        goals = goals_for(domain)
        assert [g.goal_id for g in goals] == list(range(1, 9))
        for goal in goals:
            GoalDocument.model_validate(goal.to_dict())
            assert GoalSpec.from_dict(goal.to_dict()) == goal


def test_goal_objects_must_appear_in_text():
    with pytest.raises(ContractError):
        GoalSpec("home", 1, ("place", "milk"), ("fridge",), ())


def test_near_edges_are_symmetric(home_scene):
    for e in home_scene.edges_of("Near"):
        assert Edge("Near", e.dst, e.src) in home_scene.edges


def test_action_parse_and_arity():
    action = SymbolicAction.parse("Pick(cube#1)")
    assert action == SymbolicAction("Pick", ("cube#1",))
    assert str(action) == "Pick(cube#1)"
    with pytest.raises(ContractError):
        SymbolicAction("Fly", ("cube",))
    with pytest.raises(ContractError):
        SymbolicAction.parse("Pick cube")


def test_apply_raises_on_failed_precondition(world):
    pick = SymbolicAction("Pick", ("cube",))
    assert check(pick, world) == "agent near target"
    with pytest.raises(PreconditionViolation) as info:
        apply(pick, world)
    assert info.value.predicate == "agent near target"


def test_unknown_object_raises_lookup_error(world):
    with pytest.raises(ObjectLookupError):
        apply(SymbolicAction("Pick", ("ghost",)), world)
    assert try_replay([SymbolicAction("Pick", ("ghost",))], world) is None


def test_plan_reaches_goal_without_mutating_start(world, cube_goal):
    before = world.to_dict()
    final = replay(CUBE_PLAN, world)
    assert world.to_dict() == before
    assert not satisfied(cube_goal, world)
    assert satisfied(cube_goal, final)
    assert Edge("Inside", "cube", "box") in final.edges
    assert final.held_id is None
    final.validate()


def test_closed_container_is_not_a_drop_target(world, cube_goal):
    closed = world.replace_nodes(
        [n.replace(states=frozenset()) if n.id == "box" else n for n in world.nodes]
    )
    final = replay(CUBE_PLAN, closed)
    assert not satisfied(cube_goal, final)
    assert final.parent("cube").dst == "floor"


def test_plan_cost_includes_walking(world):
    cost = plan_cost(CUBE_PLAN, world)
    assert cost > 2.0 + 1.0 + 2.0 + 1.0


def test_candidate_actions_are_applicable(world):
    actions = candidate_actions(world)
    assert actions
    assert all(applicable(a, world) for a in actions)
    assert SymbolicAction("Pick", ("cube",)) not in actions
    assert SymbolicAction("MoveTo", ("cube",)) in actions


def test_remove_objects_drops_edges(home_scene):
    target = next(n.id for n in home_scene.nodes if n.token == "bottle")
    reduced = remove_objects(home_scene, [target])
    assert not reduced.has_node(target)
    assert target in reduced.removed
    assert all(target not in (e.src, e.dst) for e in reduced.edges)
    reduced.validate()


def test_every_action_has_preconditions_and_effects():
    assert set(PRECONDITIONS) == set(ActionConstants.ARITY)
    assert set(EFFECTS) == set(ActionConstants.ARITY)


@pytest.mark.parametrize("domain", DomainConstants.DOMAINS)
def test_fresh_scenes_leave_every_goal_open(domain):
    for seed in (7, 8, 9):
        scene = make_scene(domain, seed)
        for goal in goals_for(domain):
            assert not satisfied(goal, scene.with_goal(goal)), (goal.goal_id, seed)


def test_pick_needs_a_free_gripper(world):
    holding = replay([CUBE_PLAN[0], CUBE_PLAN[1], SymbolicAction("MoveTo", ("tray",))], world)
    assert holding.held_id == "cube"
    pick = SymbolicAction("Pick", ("tray",))
    assert check(pick, holding) == "gripper free"
    with pytest.raises(PreconditionViolation) as info:
        apply(pick, holding)
    assert info.value.predicate == "gripper free"
    assert pick not in candidate_actions(holding)


def test_carried_container_moves_its_contents(world):
    loaded = place_object(world, "cube", "OnTop", "tray")
    offset = np.array(loaded.node("cube").pos) - np.array(loaded.node("tray").pos)
    steps = [SymbolicAction("MoveTo", ("tray",)), SymbolicAction("Pick", ("tray",)), SymbolicAction("MoveTo", ("box",))]
    state = loaded
    for action in steps:
        state = apply(action, state)
        assert state.parent("cube").dst == "tray"
        moved = np.array(state.node("cube").pos) - np.array(state.node("tray").pos)
        np.testing.assert_allclose(moved, offset, atol=1e-5)
    assert state.held_id == "tray"
    assert not np.allclose(state.node("tray").pos[:2], loaded.node("tray").pos[:2])
    state.validate()
