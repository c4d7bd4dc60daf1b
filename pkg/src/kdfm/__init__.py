"""Desk-scale semi-supervised learning: FixMatch and its two-stage
teacher-student variant with trusted pseudo-label selection."""

from .augment import AugmentPolicy, augment_batch, grid_policy, strong, vector_policy, weak
from .data import (
    UNLABELED,
    Dataset,
    gen_blobs,
    gen_two_moons,
    load_csv,
    load_kdf1,
    sample_balanced_labels,
    save_csv,
    save_kdf1,
    split_80_20,
)
from .ema import EmaState, effective_decay, ema_params, ema_update, init_ema
from .errors import (
    ConfigError,
    DataError,
    DataFormatError,
    KdfmError,
    NumericalError,
    ShapeError,
    UninitializedEmaError,
    UnsupportedTargetError,
)
from .experiment import (
    DatasetSpec,
    ExperimentConfig,
    Report,
    build_dataset,
    report_table,
    run_experiment,
    run_single_seed,
)
from .losses import (
    LossSpec,
    batch_loss,
    ce,
    mae,
    nce,
    rce,
    sce,
    symmetry_defect,
    symmetry_sum,
)
from .network import (
    ForwardTrace,
    Network,
    backward,
    flatten_params,
    forward,
    init_network,
    softmax,
    unflatten_params,
)
from .optim import AdamState, RegConfig, adam_step, init_adam, l2_augment, lr_at
from .selection import (
    PseudoLabelTable,
    TrustedSet,
    build_trusted_set,
    confident_indices,
    consistency_filter,
    kmeans,
)
from .training import (
    KdFixmatchResult,
    SslConfig,
    StepBatch,
    TrainState,
    evaluate_accuracy,
    fixmatch_batch_loss,
    generate_pseudo_labels,
    make_streams,
    merge_pseudo_label,
    ohl,
    one_hot,
    run_kd_fixmatch,
    train_fixmatch,
    train_supervised,
)

__version__ = "0.1.0"
