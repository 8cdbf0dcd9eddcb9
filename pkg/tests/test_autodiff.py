import math

import numpy as np
import pytest

from app.core.error_handler import ContractError, DimensionError, MissingInputError
from app.models import autodiff as ad
from app.services.trainer_service import bce_loss

from tests.conftest import numeric_grad


def test_tensors_are_two_dimensional():
    assert ad.constant(3.0).shape == (1, 1)
    assert ad.constant([1.0, 2.0]).shape == (1, 2)
    with pytest.raises(DimensionError):
        ad.constant(np.zeros((2, 2, 2)))


def test_shape_mismatch_raises_dimension_error():
    a = ad.constant(np.zeros((2, 3)))
    b = ad.constant(np.zeros((3, 2)))
    with pytest.raises(DimensionError):
        ad.add(a, b)
    with pytest.raises(DimensionError):
        ad.matmul(a, a)
    with pytest.raises(DimensionError):
        ad.add_bias(a, ad.constant(np.zeros((1, 2))))


def test_backward_needs_scalar():
    x = ad.parameter(np.ones((2, 2)))
    with pytest.raises(ContractError):
        ad.backward(ad.tanh(x))


def test_composite_graph_matches_finite_differences(rng):
    x = ad.constant(rng.normal(size=(3, 4)))
    w = ad.parameter(rng.normal(size=(4, 2)))
    b = ad.parameter(rng.normal(size=(1, 2)))
    slope = ad.parameter([[0.2]])

    def f():
        h = ad.prelu(ad.add_bias(x @ w, b), slope)
        att = ad.softmax(ad.sum_reduce(h, axis=1), axis=0)
        pooled = ad.transpose(att) @ ad.tanh(h)
        return ad.sum_reduce(ad.log(ad.sigmoid(pooled)))

    for p in (w, b, slope):
        p.zero_grad()
    ad.backward(f())
    for p in (w, b, slope):
        np.testing.assert_allclose(p.grad, numeric_grad(f, p), rtol=1e-4, atol=1e-7)


def test_shared_subexpression_accumulates_gradient():
    x = ad.parameter([[2.0]])
    y = ad.hadamard(x, x)
    loss = ad.sum_reduce(ad.add(y, x))
    ad.backward(loss)
    assert x.grad[0, 0] == pytest.approx(5.0)


def test_softmax_columns_sum_to_one(rng):
    s = ad.softmax(ad.constant(rng.normal(size=(5, 1))), axis=0)
    assert s.data.sum() == pytest.approx(1.0)


def test_bce_of_half_is_ln2():
    assert bce_loss(ad.constant([[0.5]]), [1.0]).item() == pytest.approx(math.log(2))
    assert bce_loss(ad.constant([[0.5, 0.5]]), [1.0, 0.0]).item() == pytest.approx(2 * math.log(2))


def test_bce_weighting_scales_by_alpha():
    pred = ad.constant([[0.3, 0.8]])
    plain = bce_loss(pred, [0.0, 1.0]).item()
    assert bce_loss(pred, [0.0, 1.0], alpha=2.0, weighting=True).item() == pytest.approx(2 * plain)
    assert bce_loss(pred, [0.0, 1.0], alpha=2.0, weighting=False).item() == pytest.approx(plain)


def test_bce_width_mismatch():
    with pytest.raises(DimensionError):
        bce_loss(ad.constant([[0.5, 0.5]]), [1.0])


def test_adam_moves_towards_minimum():
    x = ad.parameter([[3.0]])
    opt = ad.Adam({"x": x}, lr=0.1)
    for _ in range(200):
        x.zero_grad()
        ad.backward(ad.sum_reduce(ad.hadamard(x, x)))
        opt.step()
    assert abs(x.data[0, 0]) < 0.5


def test_checkpoint_round_trip(tmp_path, rng):
    params = {"W": ad.parameter(rng.normal(size=(2, 3))), "b": ad.parameter(np.zeros((1, 3)))}
    path = ad.save_params(tmp_path / "ckpt.npz", params, {"label": "x"})
    arrays, header = ad.load_params(path)
    assert header == {"label": "x"}
    np.testing.assert_array_equal(arrays["W"], params["W"].data)
    with pytest.raises(MissingInputError):
        ad.load_params(tmp_path / "missing.npz")
