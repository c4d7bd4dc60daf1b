"""Experiment orchestration: config parsing, multi-seed runs, reports.

One experiment = one method at one label budget, run over a list of seeds.
Each seed writes its training logs under <out>/seed<N>/ as they complete, so
an aborted sweep leaves partial results behind; the aggregated report.json
is written last. Outputs contain no timestamps or absolute paths: rerunning
an experiment with the same config reproduces every file byte for byte.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .augment import AugmentPolicy
from .data import UNLABELED, Dataset, gen_blobs, gen_two_moons, load_csv, load_kdf1, \
    sample_balanced_labels, split_80_20
from .errors import ConfigError
from .losses import LossSpec
from .optim import RegConfig
from .training import SslConfig, evaluate_accuracy, run_kd_fixmatch, train_fixmatch, \
    train_supervised

METHODS = ("baseline", "fixmatch", "kd-fixmatch-ce", "kd-fixmatch-sce")

DEFAULT_SEEDS = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "two-moons"
    path: str | None = None
    n: int = 2500
    noise: float = 0.1
    blob_classes: int = 4
    blob_per_class: int = 200
    blob_dim: int = 2
    blob_separation: float = 10.0
    data_seed: int = 7
    num_classes: int | None = None

    def __post_init__(self):
        if self.kind not in ("two-moons", "blobs", "csv", "kdf1"):
            raise ConfigError(f"unknown dataset kind {self.kind!r}")
        if self.kind in ("csv", "kdf1") and not self.path:
            raise ConfigError(f"dataset kind {self.kind!r} needs a path")


@dataclass(frozen=True)
class ExperimentConfig:
    method: str
    labels_per_class: int
    data: DatasetSpec = DatasetSpec()
    ssl: SslConfig = SslConfig()
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    alpha: float = 1.0
    beta: float = 0.1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.labels_per_class < 1:
            raise ConfigError(f"labels_per_class must be >= 1, got {self.labels_per_class}")
        if not self.seeds:
            raise ConfigError("need at least one seed")


@dataclass
class SeedResult:
    seed: int
    accuracy_pct: float
    trusted_size: int | None = None
    trusted_noise_pct: float | None = None
    confident_size: int | None = None
    confident_noise_pct: float | None = None


@dataclass
class Report:
    method: str
    labels_per_class: int
    dataset: str
    seeds: list[int]
    per_seed: list[SeedResult]
    mean_accuracy_pct: float
    std_accuracy_pct: float

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "labels_per_class": self.labels_per_class,
            "dataset": self.dataset,
            "seeds": self.seeds,
            "per_seed": [asdict(r) for r in self.per_seed],
            "mean_accuracy_pct": self.mean_accuracy_pct,
            "std_accuracy_pct": self.std_accuracy_pct,
        }


def build_dataset(spec: DatasetSpec) -> Dataset:
    if spec.kind == "two-moons":
        return gen_two_moons(spec.n, spec.noise, spec.data_seed)
    if spec.kind == "blobs":
        return gen_blobs(
            spec.blob_classes, spec.blob_per_class, spec.blob_dim,
            spec.blob_separation, spec.noise, spec.data_seed,
        )
    if spec.kind == "csv":
        return load_csv(spec.path, spec.num_classes)
    return load_kdf1(spec.path)


def parse_data_arg(text: str) -> DatasetSpec:
    """CLI shorthand: two-moons | blobs | csv:PATH | kdf1:PATH."""
    if text in ("two-moons", "blobs"):
        return DatasetSpec(kind=text)
    for prefix in ("csv", "kdf1"):
        if text.startswith(prefix + ":"):
            return DatasetSpec(kind=prefix, path=text[len(prefix) + 1 :])
    raise ConfigError(
        f"unrecognized --data value {text!r}; use two-moons, blobs, csv:PATH, or kdf1:PATH"
    )


def _label_noise_pct(soft_labels: np.ndarray, true_labels: np.ndarray) -> float | None:
    """Disagreement between argmax pseudo labels and known true labels, in %."""
    known = true_labels != UNLABELED
    if not np.any(known):
        return None
    predicted = soft_labels[known].argmax(axis=1)
    return float((predicted != true_labels[known]).mean() * 100.0)


def _write_jsonl(records: list[dict], path: Path) -> None:
    with open(path, "w") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def run_single_seed(cfg: ExperimentConfig, seed: int, out_dir: Path | None,
                    log_every: int | None = None) -> SeedResult:
    """Train one method with one seed, writing logs if out_dir is given."""
    ds = build_dataset(cfg.data)
    train, test = split_80_20(ds, seed)
    labeled, unlabeled = sample_balanced_labels(train, cfg.labels_per_class, seed)
    ssl = replace(cfg.ssl, seed=seed)
    if cfg.method == "kd-fixmatch-sce":
        ssl = replace(ssl, unlabeled_loss=LossSpec("sce", alpha=cfg.alpha, beta=cfg.beta))
    seed_dir = None
    if out_dir is not None:
        seed_dir = Path(out_dir) / f"seed{seed}"
        seed_dir.mkdir(parents=True, exist_ok=True)

    result = SeedResult(seed=seed, accuracy_pct=0.0)
    x, y = train.features, train.labels
    if cfg.method == "baseline":
        log: list = []
        state = train_supervised(x, y, labeled, ssl, train.num_classes, log=log,
                                 log_every=log_every)
        if seed_dir is not None:
            _write_jsonl(log, seed_dir / "train.jsonl")
    elif cfg.method == "fixmatch":
        log = []
        state = train_fixmatch(x, y, labeled, unlabeled, ssl, train.num_classes,
                               log=log, log_every=log_every)
        if seed_dir is not None:
            _write_jsonl(log, seed_dir / "train.jsonl")
    else:
        outer_log: list = []
        inner_log: list = []
        kd = run_kd_fixmatch(x, y, labeled, unlabeled, ssl, train.num_classes,
                             outer_log=outer_log, inner_log=inner_log,
                             log_every=log_every)
        state = kd.inner
        result.trusted_size = len(kd.trusted)
        if len(kd.trusted):
            result.trusted_noise_pct = _label_noise_pct(
                kd.trusted.outer_soft, y[kd.trusted.indices]
            )
        confident = kd.table.confidence >= ssl.select_threshold
        result.confident_size = int(confident.sum())
        if result.confident_size:
            result.confident_noise_pct = _label_noise_pct(
                kd.table.soft[confident], y[kd.table.indices[confident]]
            )
        if seed_dir is not None:
            _write_jsonl(outer_log, seed_dir / "outer.jsonl")
            _write_jsonl(inner_log, seed_dir / "inner.jsonl")
            kd.trusted.to_csv(seed_dir / "trusted.csv")

    result.accuracy_pct = evaluate_accuracy(state, test.features, test.labels)
    return result


def run_experiment(cfg: ExperimentConfig, out_dir=None, parallel: int = 1,
                   log_every: int | None = None) -> Report:
    """Run every seed, aggregate mean and population std, write report.json."""
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
    seeds = list(cfg.seeds)
    if parallel > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            futures = [
                pool.submit(run_single_seed, cfg, seed, out_path, log_every)
                for seed in seeds
            ]
            per_seed = [f.result() for f in futures]
    else:
        per_seed = [run_single_seed(cfg, seed, out_path, log_every) for seed in seeds]
    accs = np.array([r.accuracy_pct for r in per_seed])
    tag = cfg.data.kind if cfg.data.path is None else f"{cfg.data.kind}:{cfg.data.path}"
    report = Report(
        method=cfg.method,
        labels_per_class=cfg.labels_per_class,
        dataset=tag,
        seeds=seeds,
        per_seed=per_seed,
        mean_accuracy_pct=float(accs.mean()),
        std_accuracy_pct=float(accs.std()),
    )
    if out_path is not None:
        write_report(report, out_path / "report.json")
    return report


def write_report(report: Report, path) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


def load_report(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def report_table(reports: list[dict]) -> str:
    """Pivot reports into a CSV: rows = methods, columns = label budgets."""
    budgets = sorted({r["labels_per_class"] for r in reports})
    methods = [m for m in METHODS if any(r["method"] == m for r in reports)]
    cells = {(r["method"], r["labels_per_class"]): r for r in reports}
    lines = ["method," + ",".join(f"{b} labels" for b in budgets)]
    for method in methods:
        row = [method]
        for budget in budgets:
            r = cells.get((method, budget))
            if r is None:
                row.append("")
            else:
                row.append(f"{r['mean_accuracy_pct']:.2f}±{r['std_accuracy_pct']:.2f}")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# JSON config parsing (flags override file values in the CLI layer)

_DATASET_KEYS = {f.name for f in DatasetSpec.__dataclass_fields__.values()}
_SSL_KEYS = {f.name for f in SslConfig.__dataclass_fields__.values()}
_REG_KEYS = {f.name for f in RegConfig.__dataclass_fields__.values()}
_POLICY_KEYS = {f.name for f in AugmentPolicy.__dataclass_fields__.values()}


def _check_keys(d: dict, allowed: set, where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown {where} config keys: {sorted(unknown)}")


def _loss_from_value(value) -> LossSpec:
    if isinstance(value, str):
        return LossSpec(value)
    if isinstance(value, dict):
        _check_keys(value, {"kind", "alpha", "beta", "log_clamp_eps"}, "loss")
        return LossSpec(**value)
    raise ConfigError(f"loss must be a kind string or an object, got {value!r}")


def ssl_config_from_dict(d: dict) -> SslConfig:
    d = dict(d)
    _check_keys(d, _SSL_KEYS, "ssl")
    if "hidden" in d:
        d["hidden"] = tuple(int(w) for w in d["hidden"])
    if "reg" in d:
        reg = dict(d["reg"])
        _check_keys(reg, _REG_KEYS, "reg")
        d["reg"] = RegConfig(**reg)
    if "policy" in d and d["policy"] is not None:
        policy = dict(d["policy"])
        _check_keys(policy, _POLICY_KEYS, "policy")
        if "op_pool" in policy:
            policy["op_pool"] = tuple(policy["op_pool"])
        if "grid_shape" in policy and policy["grid_shape"] is not None:
            policy["grid_shape"] = tuple(policy["grid_shape"])
        d["policy"] = AugmentPolicy(**policy)
    for key in ("labeled_loss", "unlabeled_loss"):
        if key in d:
            d[key] = _loss_from_value(d[key])
    return SslConfig(**d)


def dataset_spec_from_dict(d: dict) -> DatasetSpec:
    d = dict(d)
    _check_keys(d, _DATASET_KEYS, "data")
    return DatasetSpec(**d)
