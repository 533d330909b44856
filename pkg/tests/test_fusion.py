import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dyncim import fusion as fu
from dyncim.numerics import init_encoder, softmax
from op_examples import CASES, cases_for
from strategies import logit_vals

stacks = st.tuples(st.integers(1, 4), st.integers(2, 6)).flatmap(
    lambda s: arrays(np.float64, s, elements=logit_vals))


@cases_for("fusion")
def test_worked_example(name):
    CASES[name]()


@given(stacks, st.floats(0.01, 5))
def test_equal_gates_match_summation_argmax(z, w):
    m = z.shape[0]
    gated = fu.fuse_gated(z, np.full(m, w), np.ones(m, bool))
    np.testing.assert_allclose(gated, w * fu.fuse_summation(z), atol=1e-9)
    summed = fu.fuse_summation(z)
    # exact ties aside, the winning class is the same
    if np.sum(summed == summed.max()) == 1:
        assert np.argmax(gated) == np.argmax(summed)


@given(stacks, stacks, st.floats(-3, 3))
def test_gated_fusion_is_linear(a, b, c):
    if a.shape != b.shape:
        b = np.resize(b, a.shape)
    m = a.shape[0]
    w = np.linspace(0.3, 1.7, m)
    act = np.ones(m, bool)
    np.testing.assert_allclose(fu.fuse_gated(a + c * b, w, act),
                               fu.fuse_gated(a, w, act) + c * fu.fuse_gated(b, w, act), atol=1e-9)


@given(stacks)
def test_every_strategy_yields_valid_distribution(z):
    m, k = z.shape
    head = init_encoder([2 * m, k], 0)
    feats = [np.ones(2) * i for i in range(m)]
    for logits in (fu.fuse_gated(z, np.ones(m), np.ones(m, bool)), fu.fuse_summation(z), fu.fuse_uniform(z),
                   fu.fuse_concat(feats, head)):
        assert logits.shape == (k,)
        p = softmax(logits)
        assert np.all(p >= 0) and abs(p.sum() - 1) < 1e-9


def test_inactive_modalities_are_ignored_and_renormalize_flag():
    z = np.array([[1.0, 0.0], [0.0, 4.0]])
    np.testing.assert_allclose(fu.fuse_gated(z, [2.0, 9.0], [True, False]), [2.0, 0.0])
    np.testing.assert_allclose(fu.gated_weights(np.array([0.3, 0.9]), np.array([True, True]), renormalize=True),
                               [0.25, 0.75])


def test_strategy_validation():
    with pytest.raises(ValueError):
        fu.FusionStrategy("late_attention")
    assert fu.FusionStrategy("summation").kind in fu.KINDS
