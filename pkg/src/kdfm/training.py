"""Training procedures: supervised baseline, FixMatch, and the two-stage
outer/inner pipeline with trusted pseudo-labels.

One step draws a labeled batch and (for SSL) an unlabeled batch, runs the
teacher pass on weak augmentations with no gradient, assembles per-sample
unlabeled targets (confidence-filtered one-hots, or the conflict-merging
rule when a trusted set is supplied), and takes one Adam step on the summed
labeled + weighted unlabeled + L2 objective. The EMA shadow tracks the
parameters for inference.

Runs are deterministic: every source of randomness comes from named streams
derived from (seed, stream_tag), so two runs with the same config produce
bit-identical trajectories and logs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from .augment import AugmentPolicy, augment_batch, vector_policy
from .ema import EmaState, effective_decay, ema_params, ema_update, init_ema
from .errors import ConfigError, NumericalError, ShapeError
from .losses import LossSpec, batch_loss
from .network import Network, backward, flatten_params, forward, init_network, unflatten_params
from .optim import AdamState, RegConfig, adam_step, init_adam, l2_augment, lr_at
from .selection import PseudoLabelTable, TrustedSet, build_trusted_set

DEFAULT_LOG_EVERY = 50

# stream ids within a run; the cluster seed lives outside the four streams
_STREAM_INIT, _STREAM_WEAK, _STREAM_STRONG, _STREAM_BATCH = range(4)
_CLUSTER_TAG = 97


@dataclass(frozen=True)
class SslConfig:
    """Everything one training run needs apart from the data itself."""

    hidden: tuple[int, ...] = (128, 64)
    unlabeled_weight: float = 1.0
    confidence_threshold: float = 0.95
    inner_threshold: float = 0.95
    select_threshold: float = 0.80
    labeled_loss: LossSpec = LossSpec("ce")
    unlabeled_loss: LossSpec = LossSpec("ce")
    labeled_batch: int = 64
    unlabeled_batch: int = 64
    outer_epochs: int = 60
    inner_epochs: int = 60
    reg: RegConfig = RegConfig()
    # None derives a vector policy with jitter sigma = 0.05 * feature std
    policy: AugmentPolicy | None = None
    seed: int = 1
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    ema_decay: float = 0.9999
    ema_counter_start: int = 0
    use_soft_trusted: bool = False

    def __post_init__(self):
        for name in ("confidence_threshold", "inner_threshold", "select_threshold"):
            value = getattr(self, name)
            if not (0.0 < value <= 1.0):
                raise ConfigError(f"{name} must be in (0, 1], got {value}")
        if self.unlabeled_weight < 0.0:
            raise ConfigError(f"unlabeled_weight must be >= 0, got {self.unlabeled_weight}")
        if self.labeled_batch < 1 or self.unlabeled_batch < 0:
            raise ConfigError(
                f"need labeled_batch >= 1 and unlabeled_batch >= 0, got "
                f"{self.labeled_batch}/{self.unlabeled_batch}"
            )
        if self.outer_epochs < 0 or self.inner_epochs < 0:
            raise ConfigError("epoch counts must be >= 0")

    @property
    def total_batch(self) -> int:
        return self.labeled_batch + self.unlabeled_batch


@dataclass
class RngStreams:
    init: np.random.Generator
    weak: np.random.Generator
    strong: np.random.Generator
    batch: np.random.Generator


def make_streams(seed: int, tag: int = 0) -> RngStreams:
    """Independent named streams; tag separates outer (0) and inner (1) runs."""
    return RngStreams(
        *(np.random.default_rng([seed, tag, k]) for k in range(4))
    )


@dataclass
class TrainState:
    net: Network
    params: np.ndarray
    adam: AdamState
    ema: EmaState
    step: int = 0
    labeled_loss: float = 0.0
    unlabeled_loss: float = 0.0
    mask_rate: float = 0.0

    def inference_params(self) -> np.ndarray:
        """EMA parameters; a run with zero steps falls back to the raw init."""
        if self.step == 0:
            return self.params.copy()
        return ema_params(self.ema)

    def inference_net(self) -> Network:
        return unflatten_params(self.net, self.inference_params())


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((len(labels), num_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def ohl(soft: np.ndarray) -> np.ndarray:
    """One-hot at the argmax; ties break toward the smallest class index."""
    soft = np.asarray(soft, dtype=np.float64)
    out = np.zeros_like(soft)
    out[soft.argmax()] = 1.0
    return out


def _ohl_rows(soft: np.ndarray) -> np.ndarray:
    out = np.zeros_like(soft)
    out[np.arange(len(soft)), soft.argmax(axis=1)] = 1.0
    return out


def merge_pseudo_label(inner_soft: np.ndarray, index: int, trusted: TrustedSet,
                       inner_threshold: float, use_soft: bool = False) -> np.ndarray:
    """Resolve one unlabeled sample's target between the inner and outer teachers.

    A confident inner prediction wins; otherwise a trusted outer label is
    used; otherwise the all-zero vector marks the sample as ignored.
    """
    inner_soft = np.asarray(inner_soft, dtype=np.float64)
    if inner_soft.max() >= inner_threshold:
        return ohl(inner_soft)
    pos = np.searchsorted(trusted.indices, index)
    if pos < len(trusted.indices) and trusted.indices[pos] == index:
        outer = trusted.outer_soft[pos]
        return outer.copy() if use_soft else ohl(outer)
    return np.zeros_like(inner_soft)


def _eq_targets(teacher_probs: np.ndarray, threshold: float):
    """Confidence-filtered one-hot targets; rows below threshold stay zero."""
    selected = teacher_probs.max(axis=1) >= threshold
    targets = np.zeros_like(teacher_probs)
    rows = np.flatnonzero(selected)
    targets[rows, teacher_probs[rows].argmax(axis=1)] = 1.0
    return targets


def _merged_targets(teacher_probs: np.ndarray, ids: np.ndarray, trusted: TrustedSet,
                    inner_threshold: float, use_soft: bool):
    """Vectorized conflict merging; returns (targets, branch_counts)."""
    confident = teacher_probs.max(axis=1) >= inner_threshold
    targets = np.zeros_like(teacher_probs)
    rows = np.flatnonzero(confident)
    targets[rows, teacher_probs[rows].argmax(axis=1)] = 1.0
    member = np.zeros(len(ids), dtype=bool)
    if len(trusted.indices):
        pos = np.searchsorted(trusted.indices, ids)
        pos = np.clip(pos, 0, len(trusted.indices) - 1)
        member = trusted.indices[pos] == ids
    outer_rows = np.flatnonzero(~confident & member)
    if len(outer_rows):
        pos = np.searchsorted(trusted.indices, ids[outer_rows])
        outer = trusted.outer_soft[pos]
        targets[outer_rows] = outer if use_soft else _ohl_rows(outer)
    counts = (
        int(confident.sum()),
        len(outer_rows),
        len(ids) - int(confident.sum()) - len(outer_rows),
    )
    return targets, counts


@dataclass
class StepBatch:
    labeled_weak: np.ndarray
    labeled_targets: np.ndarray
    unlabeled_weak: np.ndarray | None = None
    unlabeled_strong: np.ndarray | None = None
    unlabeled_ids: np.ndarray | None = None


@dataclass
class StepLoss:
    total: float
    grad: np.ndarray
    labeled_loss: float
    unlabeled_loss: float
    mask_rate: float
    branch_counts: tuple[int, int, int] | None = None


def fixmatch_batch_loss(net: Network, batch: StepBatch, cfg: SslConfig,
                        trusted: TrustedSet | None = None,
                        step: int | None = None) -> StepLoss:
    """Loss and flat gradient for one step.

    The teacher pass on the weak unlabeled views is treated as a constant:
    only the labeled pass and the student pass on the strong views carry
    gradient. The L2 term is added once, over all parameters.
    """
    params = flatten_params(net)
    _, probs_l, trace_l = forward(net, batch.labeled_weak)
    values_l, grads_l = batch_loss(cfg.labeled_loss, batch.labeled_targets, probs_l)
    labeled = float(values_l.mean())
    grad = backward(net, trace_l, grads_l / len(values_l))

    unlabeled = 0.0
    mask_rate = 0.0
    branch_counts = None
    has_unlabeled = batch.unlabeled_weak is not None and len(batch.unlabeled_weak) > 0
    if has_unlabeled and cfg.unlabeled_weight > 0.0:
        _, teacher_probs, _ = forward(net, batch.unlabeled_weak)
        if trusted is None:
            targets_u = _eq_targets(teacher_probs, cfg.confidence_threshold)
        else:
            targets_u, branch_counts = _merged_targets(
                teacher_probs, batch.unlabeled_ids, trusted,
                cfg.inner_threshold, cfg.use_soft_trusted,
            )
        _, probs_s, trace_s = forward(net, batch.unlabeled_strong)
        values_u, grads_u = batch_loss(cfg.unlabeled_loss, targets_u, probs_s)
        b_u = len(values_u)
        unlabeled = cfg.unlabeled_weight * float(values_u.mean())
        grad += backward(net, trace_s, cfg.unlabeled_weight * grads_u / b_u)
        mask_rate = float((targets_u.sum(axis=1) > 0.0).mean())

    l2_value = 0.5 * cfg.reg.inv_c * float(params @ params)
    total = labeled + unlabeled + l2_value
    if not np.isfinite(total):
        where = f" at step {step}" if step is not None else ""
        raise NumericalError(f"non-finite training loss{where}")
    grad = l2_augment(grad, params, cfg.reg.inv_c)
    return StepLoss(total, grad, labeled, unlabeled, mask_rate, branch_counts)


def log_every_from_env() -> int:
    raw = os.environ.get("KDFM_LOG_EVERY")
    if raw is None:
        return DEFAULT_LOG_EVERY
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"KDFM_LOG_EVERY must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ConfigError(f"KDFM_LOG_EVERY must be >= 1, got {value}")
    return value


def _train_loop(x: np.ndarray, labeled_ids: np.ndarray, labeled_targets: np.ndarray,
                unlabeled_ids: np.ndarray | None, cfg: SslConfig, epochs: int,
                trusted: TrustedSet | None, stream_tag: int,
                log: list | None, log_every: int | None) -> TrainState:
    # labeled_targets is aligned positionally with labeled_ids
    x = np.asarray(x, dtype=np.float64)
    streams = make_streams(cfg.seed, stream_tag)
    policy = cfg.policy
    if policy is None:
        policy = vector_policy(jitter_sigma_weak=0.05 * float(x.std()))
    num_classes = labeled_targets.shape[1]
    arch = (x.shape[1], *cfg.hidden, num_classes)
    net = init_network(arch, [cfg.seed, stream_tag, _STREAM_INIT])
    params = flatten_params(net)
    state = TrainState(
        net=net,
        params=params,
        adam=init_adam(len(params), cfg.beta1, cfg.beta2, cfg.adam_eps),
        ema=init_ema(params, cfg.ema_decay, cfg.ema_counter_start),
    )
    if unlabeled_ids is None:
        steps_per_epoch = max(1, len(labeled_ids) // cfg.total_batch)
        step_labeled = cfg.total_batch
    else:
        if cfg.unlabeled_batch < 1:
            raise ConfigError("SSL training needs unlabeled_batch >= 1")
        steps_per_epoch = max(1, len(unlabeled_ids) // cfg.unlabeled_batch)
        step_labeled = cfg.labeled_batch
    reg = cfg.reg if cfg.reg.epoch_length is not None else replace(
        cfg.reg, epoch_length=steps_per_epoch
    )
    cfg_run = replace(cfg, reg=reg)
    every = log_every if log_every is not None else log_every_from_env()
    total_steps = epochs * steps_per_epoch
    for step in range(total_steps):
        lr = lr_at(reg, step)
        pick = streams.batch.integers(0, len(labeled_ids), size=step_labeled)
        lab_ids = labeled_ids[pick]
        batch = StepBatch(
            labeled_weak=augment_batch(x[lab_ids], policy, streams.weak),
            labeled_targets=labeled_targets[pick],
        )
        if unlabeled_ids is not None:
            upick = streams.batch.integers(0, len(unlabeled_ids), size=cfg.unlabeled_batch)
            u_ids = unlabeled_ids[upick]
            raw = x[u_ids]
            batch.unlabeled_weak = augment_batch(raw, policy, streams.weak)
            batch.unlabeled_strong = augment_batch(raw, policy, streams.strong, "strong")
            batch.unlabeled_ids = u_ids
        result = fixmatch_batch_loss(state.net, batch, cfg_run, trusted, step)
        decay_used = effective_decay(state.ema)
        state.params, state.adam = adam_step(state.adam, state.params, result.grad, lr)
        state.ema = ema_update(state.ema, state.params)
        state.net = unflatten_params(state.net, state.params)
        state.step += 1
        state.labeled_loss = result.labeled_loss
        state.unlabeled_loss = result.unlabeled_loss
        state.mask_rate = result.mask_rate
        if log is not None and (state.step % every == 0 or state.step == total_steps):
            record = {
                "step": state.step,
                "epoch": step // steps_per_epoch,
                "lr": lr,
                "loss_labeled": result.labeled_loss,
                "loss_unlabeled": result.unlabeled_loss,
                "mask_rate": result.mask_rate,
                "ema_effective_decay": decay_used,
            }
            if result.branch_counts is not None:
                record["branch_counts"] = list(result.branch_counts)
            log.append(record)
    return state


def train_supervised(x: np.ndarray, y: np.ndarray, labeled_ids: np.ndarray,
                     cfg: SslConfig, num_classes: int, epochs: int | None = None,
                     log: list | None = None, log_every: int | None = None,
                     stream_tag: int = 0) -> TrainState:
    """Labeled-data-only training with the full batch budget."""
    labeled_ids = np.asarray(labeled_ids, dtype=np.int64)
    targets = one_hot(np.asarray(y)[labeled_ids], num_classes)
    return _train_loop(
        x, labeled_ids, targets, None, cfg,
        cfg.outer_epochs if epochs is None else epochs,
        None, stream_tag, log, log_every,
    )


def train_fixmatch(x: np.ndarray, y: np.ndarray, labeled_ids: np.ndarray,
                   unlabeled_ids: np.ndarray, cfg: SslConfig, num_classes: int,
                   trusted: TrustedSet | None = None, epochs: int | None = None,
                   log: list | None = None, log_every: int | None = None,
                   stream_tag: int = 0) -> TrainState:
    """FixMatch when trusted is None; otherwise the merged-target inner run."""
    labeled_ids = np.asarray(labeled_ids, dtype=np.int64)
    unlabeled_ids = np.asarray(unlabeled_ids, dtype=np.int64)
    targets = one_hot(np.asarray(y)[labeled_ids], num_classes)
    return _train_loop(
        x, labeled_ids, targets, unlabeled_ids, cfg,
        cfg.outer_epochs if epochs is None else epochs,
        trusted, stream_tag, log, log_every,
    )


def generate_pseudo_labels(net: Network, inference: np.ndarray, x: np.ndarray,
                           unlabeled_ids: np.ndarray, chunk: int = 512) -> PseudoLabelTable:
    """Teacher outputs on clean inputs: soft labels plus penultimate embeddings."""
    unlabeled_ids = np.asarray(unlabeled_ids, dtype=np.int64)
    eval_net = unflatten_params(net, inference)
    soft_parts, emb_parts = [], []
    for start in range(0, len(unlabeled_ids), chunk):
        rows = x[unlabeled_ids[start : start + chunk]]
        _, probs, trace = forward(eval_net, rows)
        soft_parts.append(probs)
        emb_parts.append(trace.embedding)
    return PseudoLabelTable(
        indices=unlabeled_ids.copy(),
        soft=np.concatenate(soft_parts) if soft_parts else np.empty((0, net.num_classes)),
        embeddings=np.concatenate(emb_parts) if emb_parts else np.empty((0, net.embedding_dim)),
    )


@dataclass
class KdFixmatchResult:
    outer: TrainState
    table: PseudoLabelTable
    trusted: TrustedSet
    inner: TrainState


def run_kd_fixmatch(x: np.ndarray, y: np.ndarray, labeled_ids: np.ndarray,
                    unlabeled_ids: np.ndarray, cfg: SslConfig, num_classes: int,
                    outer_log: list | None = None, inner_log: list | None = None,
                    log_every: int | None = None) -> KdFixmatchResult:
    """Two-stage pipeline: outer FixMatch, trusted selection, inner run.

    The inner network is freshly initialized (stream tag 1) and trained with
    the merged targets; its EMA parameters are the ones meant for inference.
    """
    outer_cfg = replace(cfg, unlabeled_loss=LossSpec("ce"))
    outer = train_fixmatch(
        x, y, labeled_ids, unlabeled_ids, outer_cfg, num_classes,
        trusted=None, epochs=cfg.outer_epochs, log=outer_log,
        log_every=log_every, stream_tag=0,
    )
    table = generate_pseudo_labels(outer.net, outer.inference_params(), x, unlabeled_ids)
    trusted = build_trusted_set(
        table, cfg.select_threshold, num_classes, seed=[cfg.seed, _CLUSTER_TAG]
    )
    inner = train_fixmatch(
        x, y, labeled_ids, unlabeled_ids, cfg, num_classes,
        trusted=trusted, epochs=cfg.inner_epochs, log=inner_log,
        log_every=log_every, stream_tag=1,
    )
    return KdFixmatchResult(outer=outer, table=table, trusted=trusted, inner=inner)


def evaluate_accuracy(state: TrainState, x: np.ndarray, y: np.ndarray) -> float:
    """Accuracy (%) of the inference network on clean inputs."""
    net = state.inference_net()
    _, probs, _ = forward(net, np.asarray(x, dtype=np.float64))
    predicted = probs.argmax(axis=1)
    return float((predicted == np.asarray(y)).mean() * 100.0)
