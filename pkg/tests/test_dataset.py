import numpy as np

from app.core.constants import NO_TOOL
from app.core.error_handler import TeachingFailure
from app.schemas.corpus_schemas import DemoPlan, PlanSource, Split
from app.services.dataset_service import (
    MAX_REMOVED,
    assign_splits,
    augment_corpus,
    augment_cross_scene,
    augment_object_removal,
    diversity,
    eval_cases,
    label_and_weight,
    label_vector,
    mark_optimal,
    removal_candidates,
    replays_to_goal,
    scene_cache,
    split_sizes,
)
from app.services.teacher_service import teach_many, tools_used, witness_depth
from app.services.world_service import goal_by_id, goals_for, make_scene, replay

from tests.test_world import CUBE_PLAN


def plan(**fields):
    base = dict(domain="home", goal_id=5, scene_seed=7, actions=["MoveTo(cube#0)"], sim_cost=1.0)
    base.update(fields)
    return DemoPlan(**base)


def test_teacher_plans_replay_to_goal(home_scene):
    taught = 0
    for goal in goals_for("home"):
        try:
            demos = teach_many(goal, home_scene, [11, 12])
        except TeachingFailure:
            continue
        for demo in demos:
            assert replays_to_goal(demo)
            taught += 1
    assert taught > 0


def test_witness_depth_is_zero_for_satisfied_goal(world, cube_goal):
    assert witness_depth(cube_goal, replay(CUBE_PLAN, world)) == 0


def test_tools_used_ignores_constraint_targets(world, cube_goal):
    # box 是约束目标，不算作工具
    assert tools_used(CUBE_PLAN, world, cube_goal) == frozenset()


def test_corpus_is_valid(home_corpus, small_config):
    assert home_corpus
    holdout = small_config.holdout_seed()
    for p in home_corpus:
        assert replays_to_goal(p)
        assert (p.split == Split.TRAIN.value) == (p.scene_seed != holdout)
    sizes = split_sizes(home_corpus)
    assert sizes["train"] > 0
    assert sizes["val"] + sizes["test"] > 0


def test_every_pair_has_an_optimal_plan(home_corpus):
    pairs = {p.pair_key for p in home_corpus}
    assert pairs == {p.pair_key for p in home_corpus if p.optimal}


def test_mark_optimal_shares_ties():
    plans = mark_optimal([plan(sim_cost=3.0, style_seed=1), plan(sim_cost=3.0, style_seed=2), plan(sim_cost=4.0)])
    assert [p.optimal for p in plans] == [True, True, False]


def test_holdout_plans_alternate_between_val_and_test():
    plans = assign_splits([plan(style_seed=k) for k in range(4)] + [plan(scene_seed=8)], holdout_seed=7)
    splits = [p.split for p in plans if p.scene_seed == 7]
    assert splits == ["val", "test", "val", "test"]
    assert [p.split for p in plans if p.scene_seed == 8] == ["train"]


def test_label_vector_marks_no_tool_only_without_tools():
    tokens = ("box", "tray", NO_TOOL)
    np.testing.assert_array_equal(label_vector(plan(tools_used=[]), tokens), [0, 0, 1])
    np.testing.assert_array_equal(label_vector(plan(tools_used=["tray"]), tokens), [0, 1, 0])


def test_group_targets_sum_weighted_labels():
    plans = [
        plan(tools_used=["tray"], optimal=True, style_seed=1),
        plan(tools_used=[], style_seed=2),
    ]
    groups = label_and_weight(plans, w_opt=2.0, weighting=True)
    assert len(groups) == 1
    pos, neg = groups[0].targets(("tray", NO_TOOL))
    np.testing.assert_array_equal(pos, [2.0, 1.0])
    np.testing.assert_array_equal(neg, [1.0, 2.0])

    unweighted = label_and_weight(plans, w_opt=2.0, weighting=False)
    assert unweighted[0].weights == [1.0, 1.0]


def test_eval_cases_count_plans():
    plans = [plan(tools_used=["tray"], style_seed=1), plan(tools_used=["box"], style_seed=2)]
    (case,) = eval_cases(plans)
    assert case.count == 2
    assert case.acceptable == frozenset({"tray", "box"})


def test_removal_candidates_skip_goal_and_plan_objects(home_scene):
    goal = goal_by_id("home", 1)
    teacher = teach_many(goal, home_scene, [11])[0]
    actions = teacher.parsed_actions()
    touched = {a.target for a in actions}
    for object_id in removal_candidates(home_scene, goal, actions):
        node = home_scene.node(object_id)
        assert not goal.mentions(node)
        assert object_id not in touched
        assert not home_scene.children(object_id)


def test_removal_augmentation_respects_limits(home_corpus, small_config):
    added, count = augment_object_removal(home_corpus, small_config.removal_seed, variants=2)
    assert count.accepted == len(added)
    for derived in added:
        assert derived.source == PlanSource.REMOVAL.value
        assert 1 <= len(derived.removed) <= MAX_REMOVED
        base = make_scene(derived.domain, derived.scene_seed)
        goal = goal_by_id(derived.domain, derived.goal_id)
        touched = {a.target for a in derived.parsed_actions()}
        for object_id in derived.removed:
            assert not goal.mentions(base.node(object_id))
            assert object_id not in touched
        assert replays_to_goal(derived)


def test_augmented_corpus_only_grows_training_split(home_corpus, small_config):
    merged, cross, removal = augment_corpus(home_corpus, small_config)
    assert len(merged) == len(home_corpus) + cross.accepted + removal.accepted
    before = split_sizes(home_corpus)
    after = split_sizes(merged)
    assert after["val"] == before["val"]
    assert after["test"] == before["test"]
    assert all(replays_to_goal(p) for p in merged)


def test_scene_cache_reuses_scenes():
    a = scene_cache.get("home", 7)
    assert scene_cache.get("home", 7) is a
    assert scene_cache.get("home", 7, ()) is a


def test_cross_scene_bookkeeping_counts_duplicates(home_corpus, small_config):
    seeds = small_config.scene_seeds()
    added, count = augment_cross_scene(home_corpus, seeds)
    sources = [p for p in home_corpus if p.split == Split.TRAIN.value and p.source == PlanSource.TEACHER.value]
    assert count.attempted == len(sources) * (len(seeds) - 1)
    assert count.accepted == len(added)
    assert count.duplicates <= count.accepted
    assert all(p.source == PlanSource.CROSS_SCENE.value and replays_to_goal(p) for p in added)

    again, repeat = augment_cross_scene(list(home_corpus) + added, seeds)
    assert len(again) == len(added)
    assert repeat.attempted == count.attempted
    assert repeat.duplicates == repeat.accepted == count.accepted


def test_removal_bookkeeping(home_corpus, small_config):
    variants = 4
    added, count = augment_object_removal(home_corpus, small_config.removal_seed, variants=variants)
    sources = [p for p in home_corpus if p.split == Split.TRAIN.value and p.source == PlanSource.TEACHER.value]
    expected = sum(
        variants for p in sources
        if removal_candidates(scene_cache.for_plan(p), goal_by_id(p.domain, p.goal_id), p.parsed_actions())
    )
    assert count.attempted == expected
    assert count.accepted == len(added)
    assert count.accepted + count.duplicates <= count.attempted
    keys = {(p.pair_key, tuple(p.actions), p.style_seed) for p in added}
    assert len(keys) == len(added)


def test_diversity_counts_goals_with_two_tools():
    plans = [
        plan(goal_id=1, tools_used=["tray"]),
        plan(goal_id=1, tools_used=["big-tray"], style_seed=1),
        plan(goal_id=2, tools_used=["box"]),
        plan(goal_id=2, tools_used=["box"], style_seed=1),
        plan(goal_id=3, tools_used=["mop", "sponge"]),
    ]
    assert diversity(plans, "home") == 0.25
    assert diversity(plans, "factory") == 0.0


def test_teacher_meets_the_diversity_floor():
    demos = []
    for seed in (7, 8):
        scene = make_scene("home", seed)
        for goal in goals_for("home"):
            try:
                demos.extend(teach_many(goal, scene, range(30)))
            except TeachingFailure:
                continue
    assert diversity(demos, "home") >= 0.5
