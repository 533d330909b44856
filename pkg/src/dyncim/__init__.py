"""Dynamic curriculum learning for imbalanced multimodal classification."""

from .fusion import FusionStrategy, fuse_concat, fuse_gated, fuse_summation, fuse_uniform
from .modality_curriculum import (
    ModalityState,
    activate_and_reweight,
    assess_modalities,
    balance_factors,
    fuse_effectiveness,
    gains,
    gates,
    gmr,
    hmir,
    omega_init,
)
from .numerics import MlpEncoder, backward, cross_entropy, forward, init_encoder, sgd_step, softmax
from .sample_curriculum import (
    DifficultyRecord,
    MetricOrientation,
    PredictionSet,
    VolatilityState,
    composite_difficulty,
    consistency,
    deviation_loss,
    metric_weights,
    score_samples,
    stability,
    standardize,
    update_volatility,
)
from .synth_data import DatasetSpec, ModalitySpec, dominance_profile, generate, load_dataset, save_dataset
from .trainer import CurriculumSettings, EtaSchedule, TrainRecord, eta_at, modality_alignment, solve_v, train_epoch

__version__ = "0.1.0"
