import numpy as np
import pytest

from app.core.constants import NO_TOOL
from app.core.error_handler import ConfigError, ContractError, DimensionError
from app.models import autodiff as ad
from app.models.toolnet import ABLATION_LADDER, AblationConfig, ToolDistribution, ToolNet, argmax_tool
from app.services.dataset_service import tool_vocab
from app.services.embedding_service import hash_provider
from app.services.trainer_service import bce_loss
from app.services.world_service import goals_for, make_scene

from tests.conftest import SMALL_DIMS, numeric_grad, small_ablation

ROWS = [name for name, _, _ in ABLATION_LADDER]


def build(row, seed=0):
    return ToolNet(small_ablation(row), tool_vocab("home"), seed=seed)


def test_ladder_labels():
    labels = [AblationConfig.for_row(row).label for row in ROWS]
    assert labels == ["GGCN", "+Metric", "+Attn", "+L", "+NT", "+C", "+W"]
    assert AblationConfig.for_row("full").label == "+W"
    with pytest.raises(ConfigError):
        AblationConfig.for_row("bogus")


def test_attention_requires_metric():
    with pytest.raises(ConfigError):
        AblationConfig(attn=True, metric=False)


@pytest.mark.parametrize("row", ROWS)
def test_output_is_a_likelihood_over_candidates(row, world, cube_goal, provider):
    model = build(row)
    inp = model.prepare(world, cube_goal, provider)
    out = model.forward(inp)
    assert out.shape == (1, len(inp.tokens))
    assert inp.tokens[-1] == NO_TOOL
    assert np.all((out.data > 0) & (out.data < 1))


@pytest.mark.parametrize("row", ROWS)
def test_gradients_match_finite_differences(row, world, cube_goal, provider):
    model = build(row, seed=4)
    inp = model.prepare(world, cube_goal, provider)
    y = np.zeros(len(inp.tokens))
    y[0] = 1.0

    def loss():
        return bce_loss(model.forward(inp), y)

    model.zero_grad()
    ad.backward(loss())
    for name, p in model.params.items():
        np.testing.assert_allclose(p.grad, numeric_grad(loss, p), rtol=1e-4, atol=1e-6, err_msg=name)


def test_factored_head_scores_scene_tools(world, cube_goal, provider):
    model = build("l")
    inp = model.prepare(world, cube_goal, provider, extra_tokens=("stool",))
    assert inp.candidates == ("box", "stool", "tray")


def test_no_tool_head_composition(world, cube_goal, provider):
    model = build("nt")
    inp = model.prepare(world, cube_goal, provider)
    out = model.forward(inp).data.reshape(-1)

    h_scene, _ = model.encode_scene(inp)
    context = ad.concat([h_scene, ad.constant(inp.goal_text)])
    p_none = ad.sigmoid(model._mlp(context, "nt")).item()
    rows = ad.concat([ad.constant(inp.candidate_embeddings), ad.tile_rows(context, len(inp.candidates))])
    p_tools = ad.sigmoid(model._mlp(rows, "head")).data.reshape(-1)

    assert abs(out[-1] - p_none) <= 1e-12
    np.testing.assert_allclose(out[:-1], (1.0 - p_none) * p_tools, rtol=0, atol=1e-12)


def test_attention_weights_sum_to_one(world, cube_goal, provider):
    model = build("attn")
    inp = model.prepare(world, cube_goal, provider)
    alpha = model.attention(model.node_states(inp), inp)
    assert alpha.shape == (len(world.nodes), 1)
    assert abs(alpha.data.sum() - 1.0) <= 1e-12


PERMUTED_SCENES = [("home", 7), ("home", 8), ("factory", 7), ("factory", 8), ("factory", 9)]


@pytest.mark.parametrize("row", ["ggcn", "attn", "w"])
def test_prediction_is_invariant_to_node_order(row, provider, rng):
    for domain, seed in PERMUTED_SCENES:
        scene = make_scene(domain, seed)
        goal = goals_for(domain)[seed % 8]
        model = ToolNet(small_ablation(row), tool_vocab(domain), seed=0)
        inp = model.prepare(scene, goal, provider)
        h_base = model.encode_scene(inp)[0].data
        base = model.predict_input(inp)
        for _ in range(20):
            order = [int(i) for i in rng.permutation(len(scene.nodes))]
            shuffled = model.prepare(scene.permuted(order), goal, provider)
            np.testing.assert_allclose(model.encode_scene(shuffled)[0].data, h_base, rtol=0, atol=1e-9)
            dist = model.predict_input(shuffled)
            assert dist.tokens == base.tokens
            np.testing.assert_allclose(dist.values, base.values, rtol=0, atol=1e-9)


def test_argmax_ties_pick_smallest_tool():
    dist = ToolDistribution(("tray", "box", NO_TOOL), np.array([0.4, 0.4, 0.4]))
    assert argmax_tool(dist) == "box"
    assert dist.prob("tray") == pytest.approx(0.4)
    assert dist.no_tool == pytest.approx(0.4)
    assert ToolDistribution(("box", NO_TOOL), np.array([0.2, 0.7])).argmax_tool() == NO_TOOL


def test_distribution_must_end_with_no_tool():
    with pytest.raises(ContractError):
        ToolDistribution(("box", "tray"), np.array([0.1, 0.2]))


def test_provider_dimension_must_match(world, cube_goal):
    with pytest.raises(DimensionError):
        build("ggcn").prepare(world, cube_goal, hash_provider(SMALL_DIMS["embedding_dim"] + 1, 3))


def test_checkpoint_round_trip(tmp_path, world, cube_goal, provider):
    model = build("w", seed=2)
    path = model.save(tmp_path / "w_home.npz", provider)
    restored = ToolNet.load(path, provider)
    np.testing.assert_allclose(
        restored.predict(world, cube_goal, provider).values,
        model.predict(world, cube_goal, provider).values,
    )
    with pytest.raises(ContractError):
        ToolNet.load(path, hash_provider(SMALL_DIMS["embedding_dim"], 99))
