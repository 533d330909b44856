"""Training-loop checks that compose the module operations by hand."""

import numpy as np

from dyncim import modality_curriculum as mc
from dyncim import numerics as nx
from dyncim import sample_curriculum as sc
from dyncim.fusion import FusionStrategy
from dyncim.synth_data import DatasetSpec, ModalitySpec, generate
from dyncim.trainer import CurriculumSettings, EtaSchedule, accuracy, build_state, iterate_batches, train_epoch

FUSION = FusionStrategy("gated_dyncim")
SETTINGS = CurriculumSettings()


def small_dataset(n=40, seed=3):
    return generate(DatasetSpec(n, 3, (ModalitySpec(5, 0.8), ModalitySpec(4, 0.3)), 0.5, seed))


def check_eta_saturation():
    ds = small_dataset()
    state = build_state(ds.dims, 3, [[6], [6]], FUSION, SETTINGS, EtaSchedule(1e12), 0)
    for t in range(2):
        state, rec = train_epoch(state, FUSION, iterate_batches(ds, 8, np.random.default_rng(t)), t, SETTINGS, 0.1)
        np.testing.assert_allclose(rec.per_sample["v"], 1.0, rtol=0, atol=1e-9)
        assert rec.mean_d_task < 1.0 and rec.mean_d_fuse < 1.0  # W still applied


def check_lr_zero():
    ds = small_dataset()
    state = build_state(ds.dims, 3, [[6], [6]], FUSION, SETTINGS, EtaSchedule(), 0)
    before = [w.copy() for e in state.encoders for w in e.weights + e.biases]
    accs = []
    for t in range(3):
        state, rec = train_epoch(state, FUSION, iterate_batches(ds, 8, np.random.default_rng(t)), t, SETTINGS, 0.0)
        accs.append(rec.accuracy)
    after = [w for e in state.encoders for w in e.weights + e.biases]
    for a, b in zip(before, after):
        assert np.array_equal(a, b)
    assert accs[0] == accs[1] == accs[2]
    assert accuracy(state, FUSION, SETTINGS, ds) == accuracy(state, FUSION, SETTINGS, ds)


def hand_step(encoders, xs, y, eta, lr):
    """One self-paced step on a single sample, composed from the public module operations."""
    outs = [nx.forward(e, x) for e, x in zip(encoders, xs)]
    z = np.array([o[0] for o in outs])
    p = np.array([nx.softmax(zm) for zm in z])
    losses = np.array([nx.cross_entropy(pm, y) for pm in p])
    # cold start: gates 0.5 give the provisional fused loss
    omega = mc.omega_init(losses)
    active0, star0 = mc.activate_and_reweight(omega, np.full(len(z), 0.5))
    provisional = nx.cross_entropy(nx.softmax(sum(w * zm for w, zm, a in zip(star0, z, active0) if a)), y)
    ms = mc.assess_modalities(losses, provisional)
    fused_logits = sum(w * zm for w, zm, a in zip(ms.omega_star, z, ms.active) if a)
    pf = nx.softmax(fused_logits)
    l_fused = nx.cross_entropy(pf, y)
    preds = sc.PredictionSet(p, pf, y)
    d_loss, delta, _ = sc.deviation_loss(losses, l_fused, preds)
    raw = [d_loss, sc.consistency(preds), sc.stability(pf, y)]
    std = sc.standardize(raw)
    # a single batch only seeds the volatility reference, so the weights stay uniform
    d_task = sc.composite_difficulty(std, sc.metric_weights(sc.VolatilityState()))
    w_factor = d_task * mc.fuse_effectiveness(ms.gates)
    v = float(np.clip(1 - w_factor * d_loss / (2 * eta), 0, 1))
    onehot = np.eye(len(pf))[y]
    new = []
    for m, (e, (_, cache)) in enumerate(zip(encoders, outs)):
        g = v * (delta[m] * (p[m] - onehot) + ms.omega_star[m] * (pf - onehot))
        new.append(nx.sgd_step(e, nx.backward(e, cache, g), lr))
    return new, v


def check_hand_stepped_oracle():
    ds = small_dataset(n=1, seed=9)
    hidden = [[4], [3]]
    state = build_state(ds.dims, 3, hidden, FUSION, SETTINGS, EtaSchedule(2.0), 21, "tanh")
    rng = np.random.default_rng(21)
    mine = [nx.init_encoder([d, *h, 3], rng, "tanh") for d, h in zip(ds.dims, hidden)]
    expected, v = hand_step(mine, [f[0] for f in ds.features], int(ds.labels[0]), 2.0, 0.3)
    assert 0 < v < 1
    state, rec = train_epoch(state, FUSION, iterate_batches(ds, 1, np.random.default_rng(0)), 0, SETTINGS, 0.3)
    np.testing.assert_allclose(rec.per_sample["v"], [v], rtol=0, atol=1e-12)
    for got, want in zip(state.encoders, expected):
        for a, b in zip(got.weights + got.biases, want.weights + want.biases):
            np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
