import numpy as np
import pytest

from app.core.error_handler import ContractError
from app.models import autodiff as ad
from app.models.toolnet import ToolNet
from app.schemas.corpus_schemas import Split
from app.schemas.result_schemas import ResultRow
from app.services.dataset_service import (
    EvalCase,
    eval_cases,
    label_and_weight,
    split_of,
    tool_vocab,
)
from app.services.embedding_service import hash_provider
from app.services.trainer_service import (
    EvalResult,
    TrainConfig,
    bce_loss,
    evaluate,
    group_loss,
    predict_cases,
    result_row,
    train,
)

from tests.conftest import small_ablation


@pytest.fixture(scope="module")
def trained(home_corpus, small_config):
    groups = label_and_weight(split_of(home_corpus, Split.TRAIN), small_config.w_opt, weighting=True)
    val = eval_cases(split_of(home_corpus, Split.VAL))
    provider = hash_provider(small_config.embedding_dim, small_config.embedding_seed)
    config = TrainConfig.from_pipeline(small_config)
    result = train(groups, val, small_ablation("w"), config, provider, tool_vocab("home"), domain="home")
    return result, provider, val


def test_training_history_is_consistent(trained, small_config):
    result, _, _ = trained
    history = result.history
    assert 1 <= len(history.epochs) <= small_config.epochs
    assert all(np.isfinite(e.loss) for e in history.epochs)
    assert 1 <= history.best_epoch <= len(history.epochs)
    assert history.best_val_accuracy == max(e.val_accuracy for e in history.epochs)
    assert history.model == "+W"
    assert history.parameters == result.model.parameter_count()


def test_training_is_deterministic(trained, home_corpus, small_config):
    result, provider, val = trained
    groups = label_and_weight(split_of(home_corpus, Split.TRAIN), small_config.w_opt, weighting=True)
    again = train(groups, val, small_ablation("w"), TrainConfig.from_pipeline(small_config), provider,
                  tool_vocab("home"), domain="home")
    for name, p in result.model.params.items():
        np.testing.assert_array_equal(p.data, again.model.params[name].data)


def test_evaluate_counts_plans(trained):
    result, provider, val = trained
    predictions = predict_cases(result.model, val, provider)
    expected = sum(c.count for c, p in zip(val, predictions) if p in c.acceptable)
    scored = evaluate(result.model, val, provider)
    assert scored.correct == expected
    assert scored.total == sum(c.count for c in val)


def test_parallel_prediction_matches_serial(trained):
    result, provider, val = trained
    assert predict_cases(result.model, val, provider, workers=2) == predict_cases(result.model, val, provider)


def test_training_needs_records(provider):
    with pytest.raises(ContractError):
        train([], [], small_ablation("ggcn"), TrainConfig(epochs=1), provider, tool_vocab("home"))


def test_evaluate_needs_cases(provider):
    model = ToolNet(small_ablation("ggcn"), tool_vocab("home"))
    with pytest.raises(ContractError):
        evaluate(model, [], provider)


def test_case_with_acceptable_prediction_is_correct(world, cube_goal, provider):
    model = ToolNet(small_ablation("nt"), tool_vocab("home"))
    tokens = set(model.prepare(world, cube_goal, provider).tokens)
    case = EvalCase(("home", 5, 0, ()), cube_goal, world, frozenset(tokens), count=3)
    assert evaluate(model, [case], provider).accuracy == pytest.approx(1.0)
    assert evaluate(model, [case], provider).total == 3


def test_result_row_in_percent():
    row = result_row(
        "+W",
        {"home": EvalResult(3, 4)},
        {"home": {"I": EvalResult(1, 2), "II": EvalResult(2, 2)}},
    )
    assert row.test_home == pytest.approx(75.0)
    assert row.test_factory is None
    assert row.gentest_I == pytest.approx(50.0)
    assert row.gentest_home == pytest.approx(75.0)
    assert ResultRow.model_validate(row.to_row()) == row


def test_group_loss_equals_sum_of_weighted_losses():
    pred = ad.constant(np.array([[0.3, 0.6, 0.2]]))
    answers = [np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])]
    weights = [2.0, 1.0]
    pos = sum(w * y for w, y in zip(weights, answers))
    neg = sum(w * (1.0 - y) for w, y in zip(weights, answers))
    expected = sum(bce_loss(pred, y, alpha=w, weighting=True).item() for w, y in zip(weights, answers))
    assert group_loss(pred, pos, neg).item() == pytest.approx(expected)


@pytest.mark.slow
def test_full_model_beats_the_baseline(scaled_corpus, scaled_model):
    test = eval_cases(split_of(scaled_corpus, Split.TEST))
    full, full_provider = scaled_model("w")
    base, base_provider = scaled_model("ggcn")
    full_accuracy = evaluate(full, test, full_provider).accuracy
    assert full_accuracy > evaluate(base, test, base_provider).accuracy
    assert full_accuracy >= 0.5
