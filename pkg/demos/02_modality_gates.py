"""
Gating a dominant modality
==========================

Per-sample losses for a strong and a weak modality, and how the geometric
and harmonic measures turn them into gates and boosted fusion weights.
"""

import numpy as np

from dyncim import assess_modalities

# columns are samples: the audio-like modality is good, the visual-like one
# barely better than chance on three classes (ln 3 ~ 1.10)
losses = np.array([
    [0.20, 0.35, 0.90, 1.40],
    [1.05, 1.00, 0.95, 1.10],
])
fused = np.array([0.25, 0.30, 0.80, 1.20])

s = assess_modalities(losses, fused)
print("gains      ", s.gains.round(3).tolist())
print("omega      ", s.omega.round(3).tolist())
print("D_G        ", s.d_gmr.round(3).tolist())
print("D_H        ", s.d_hmir.round(3).tolist())
print("gates      ", s.gates.round(3).tolist())
print("omega*     ", s.omega_star.round(3).tolist())
print("D_Fuse     ", s.d_fuse.round(3).tolist())

# with two modalities both balance factors see the same |gain - mean gain|,
# so the two gates always agree and only omega separates the modalities
assert np.allclose(s.gates[0], s.gates[1])

# a stricter threshold suppresses both; the fallback keeps the top gate (ties go to the first)
s = assess_modalities(losses, fused, threshold=0.99)
print("active at 0.99:", s.active.tolist())
