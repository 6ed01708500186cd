from __future__ import annotations

import numpy as np
import pytest

from numuon.errors import InvalidInput, ShapeError
from numuon.models import (
    MlpModel,
    TaskSpec,
    finite_diff_grad,
    forward,
    init_mlp,
    loss_and_grad,
    make_dataset,
)


def _rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


def test_zero_model_zero_loss():
    model = init_mlp([4, 5, 3], rng=0)
    model = MlpModel([np.zeros_like(W) for W in model.weights], model.biases, model.activations)
    loss, grads = loss_and_grad(model, np.ones((6, 4)), np.zeros((6, 3)))
    assert loss == 0.0
    assert all(not np.any(g) for g in grads.values())


@pytest.mark.parametrize("act", ["tanh", "relu", "identity"])
@pytest.mark.parametrize("kind", ["lowrank_teacher_regression", "softmax_classification"])
def test_gradients_match_finite_differences(act, kind):
    rng = np.random.default_rng(hash((act, kind)) % 2**32)
    sizes = [5, 7, 6, 4]
    model = init_mlp(sizes, act, rng=rng)
    for b in model.biases:
        b += 0.1 * rng.standard_normal(b.shape)
    X = rng.standard_normal((9, 5))
    Y = rng.integers(0, 4, 9) if kind == "softmax_classification" else rng.standard_normal((9, 4))
    _, g = loss_and_grad(model, X, Y, kind)
    fd = finite_diff_grad(model, X, Y, kind)
    for name in g:
        assert _rel_err(g[name], fd[name]) <= 1e-4, name


def test_forward_shapes_and_errors(rng):
    model = init_mlp([3, 4, 2], rng=rng)
    pred, cache = forward(model, rng.standard_normal((5, 3)))
    assert pred.shape == (5, 2) and len(cache) == 2
    with pytest.raises(ShapeError):
        forward(model, np.ones((5, 4)))
    with pytest.raises(ShapeError):
        loss_and_grad(model, np.ones((5, 3)), np.ones((5, 3)))
    with pytest.raises(ShapeError):
        loss_and_grad(model, np.ones((5, 3)), np.ones((5, 2)), "softmax_classification")


def test_model_validation():
    with pytest.raises(ShapeError):
        MlpModel([np.zeros((3, 2)), np.zeros((2, 4))], [np.zeros(3), np.zeros(2)], ["tanh", "identity"])
    with pytest.raises(InvalidInput):
        init_mlp([2, 3, 2], "gelu")


def test_init_scale():
    model = init_mlp([400, 300], rng=0)
    assert np.std(model.weights[0]) == pytest.approx(1 / np.sqrt(400), rel=0.02)
    assert model.activations == ["identity"]


def test_dataset_teacher():
    task = TaskSpec(teacher_rank=3, train_size=50, eval_size=10, noise_std=0.0)
    d = make_dataset(task, 8, 6)
    assert np.linalg.matrix_rank(d.teacher) == 3
    np.testing.assert_allclose(d.Y_train, d.X_train @ d.teacher.T)
    assert d.X_eval.shape == (10, 8)
    d2 = make_dataset(task, 8, 6)
    np.testing.assert_array_equal(d.X_train, d2.X_train)
    cls = make_dataset(TaskSpec("softmax_classification", teacher_rank=3, train_size=20), 8, 5)
    assert cls.Y_train.dtype.kind == "i" and cls.Y_train.max() < 5
    with pytest.raises(InvalidInput):
        make_dataset(TaskSpec(teacher_rank=9), 8, 6)
    with pytest.raises(InvalidInput):
        TaskSpec(kind="lm")
