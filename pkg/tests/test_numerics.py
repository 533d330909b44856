import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dyncim import numerics as nx
from gradcheck import max_relative_error, random_encoder
from op_examples import CASES, cases_for


@cases_for("numerics")
def test_worked_example(name):
    CASES[name]()


finite = st.floats(-50, 50, allow_nan=False)


@given(arrays(np.float64, st.integers(1, 8), elements=finite), finite)
def test_softmax_simplex_and_shift_invariance(z, c):
    p = nx.softmax(z)
    assert np.all(p >= 0) and abs(p.sum() - 1) < 1e-9
    np.testing.assert_allclose(nx.softmax(z + c), p, rtol=0, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    assert max_relative_error(random_encoder(rng), rng) < 1e-5


def test_batched_backward_sums_per_sample_gradients():
    enc = nx.init_encoder([3, 5, 2], 4, "tanh")
    x = np.random.default_rng(0).normal(size=(4, 3))
    g = np.random.default_rng(1).normal(size=(4, 2))
    logits, cache = nx.forward(enc, x)
    total = nx.backward(enc, cache, g)
    for i in range(4):
        _, c = nx.forward(enc, x[i])
        one = nx.backward(enc, c, g[i])
        np.testing.assert_allclose(total.inputs[i], one.inputs, atol=1e-12)
    parts = [nx.backward(enc, nx.forward(enc, x[i])[1], g[i]) for i in range(4)]
    for layer in range(2):
        np.testing.assert_allclose(total.weights[layer], sum(p.weights[layer] for p in parts), atol=1e-12)


def test_grad_features_adds_penultimate_gradient():
    enc = nx.init_encoder([2, 3, 2], 0, "tanh")
    x = np.array([0.4, -0.9])
    extra = np.array([0.5, -1.0, 2.0])
    _, cache = nx.forward(enc, x)
    g = nx.backward(enc, cache, np.zeros(2), grad_features=extra)
    h = np.tanh(x @ enc.weights[0])
    np.testing.assert_allclose(g.biases[0], extra * (1 - h * h), atol=1e-12)


def test_parameters_deterministic_after_steps():
    def train():
        enc = nx.init_encoder([4, 6, 3], 11)
        rng = np.random.default_rng(2)
        for _ in range(5):
            x, y = rng.normal(size=(8, 4)), rng.integers(0, 3, 8)
            logits, cache = nx.forward(enc, x)
            enc = nx.sgd_step(enc, nx.backward(enc, cache, nx.softmax(logits) - np.eye(3)[y]), 0.1)
        return enc

    a, b = train(), train()
    for u, w in zip(a.weights + a.biases, b.weights + b.biases):
        assert np.array_equal(u, w)


def test_encoder_rejects_inconsistent_layers():
    with pytest.raises(nx.ShapeError):
        nx.MlpEncoder([3, 2], [np.zeros((2, 2))], [np.zeros(2)], "relu")


def test_sgd_step_rejects_shape_mismatch_and_negative_lr():
    enc = nx.init_encoder([3, 2], 0)
    bad = nx.Gradients([np.zeros((2, 2))], [np.zeros(2)], None)
    with pytest.raises(nx.ShapeError):
        nx.sgd_step(enc, bad, 0.1)
    with pytest.raises(ValueError):
        nx.sgd_step(enc, nx.Gradients([np.zeros((3, 2))], [np.zeros(2)], None), -1.0)


def test_cross_entropy_floor_keeps_zero_probability_finite():
    assert nx.cross_entropy(np.array([1.0, 0.0]), 1) == pytest.approx(-np.log(nx.PROB_FLOOR))
