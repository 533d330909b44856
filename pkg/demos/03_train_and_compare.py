"""
Training with the curriculum against plain concatenation
========================================================

One seed of the bundled benchmark: a strong and a weak modality (SNR 4:1)
with per-sample noise. Takes about five seconds.
"""

from scipy.stats import spearmanr

from dyncim import config
from dyncim.experiment import run_config

base = config.load("demos/benchmark.yaml")
concat = base
for path, value in [("fusion.kind", "concat_head"), ("curriculum.sdc_enabled", False),
                    ("curriculum.mdc_enabled", False), ("curriculum.task_loss", "fused")]:
    concat = config.set_path(concat, path, value)

full = run_config(base)
plain = run_config(config.resolve(concat))
print(f"curriculum test accuracy {full.final_test_accuracy:.4f}")
print(f"concat     test accuracy {plain.final_test_accuracy:.4f}")

# does the learned difficulty line up with the generator's ground truth?
rho = spearmanr(full.difficulty["true_difficulty"], full.difficulty["d_task"]).statistic
print(f"Spearman(true difficulty, D_Task) = {rho:.3f}")

for rec in full.records[::6]:
    print(f"epoch {rec.epoch:2d}  loss {rec.mean_loss:.3f}  acc {rec.accuracy:.3f}  "
          f"mean v {rec.mean_v:.3f}  psi {rec.psi.round(2).tolist()}")
