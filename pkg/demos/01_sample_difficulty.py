"""
Scoring how hard a sample is
============================

Three signals per sample: how much worse the unimodal heads do than the
fused one, how much they disagree with it, and how confident the fused
prediction is in the right class.
"""

import numpy as np

from dyncim import PredictionSet, VolatilityState, metric_weights, score_samples, update_volatility

# two modalities, three classes, four samples; the true class is 0 everywhere
per_modality = np.array([
    [[0.90, 0.05, 0.05], [0.60, 0.30, 0.10], [0.34, 0.33, 0.33], [0.10, 0.80, 0.10]],
    [[0.80, 0.10, 0.10], [0.40, 0.40, 0.20], [0.30, 0.40, 0.30], [0.05, 0.05, 0.90]],
])
fused = np.array([[0.92, 0.04, 0.04], [0.55, 0.35, 0.10], [0.33, 0.36, 0.31], [0.10, 0.45, 0.45]])
labels = np.zeros(4, dtype=int)

losses = -np.log(per_modality[..., 0])
loss_fused = -np.log(fused[:, 0])
preds = PredictionSet(per_modality, fused, labels)

# before any history the three metrics are weighted equally
rec = score_samples(losses, loss_fused, preds, metric_weights(VolatilityState()))
for i, d in enumerate(rec.d_task):
    print(f"sample {i}: D_L={rec.d_loss[i]:6.3f} D_C={rec.d_consistency[i]:.3f} "
          f"D_S={rec.d_stability[i]:6.3f} -> difficulty {d:.3f}")

# the weights follow whichever metric moves the most between batches
state = VolatilityState(gamma=0.9)
rng = np.random.default_rng(0)
for step in range(50):
    wobble = np.array([0.5 + 0.2 * rng.standard_normal(), 0.5, 0.5 + 0.02 * rng.standard_normal()])
    state = update_volatility(state, wobble)
print("metric weights after a noisy loss signal:", metric_weights(state).round(3))
