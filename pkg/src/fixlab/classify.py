"""Linear one-vs-rest SVM and the repeated train/test evaluation harness."""
from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import binio
from .errors import CoverageError, EmptyInputError, ValidationError
from .gaze import Condition
from .pooling import (
    DEFAULT_LEVELS,
    DEFAULT_WINDOW,
    PoolingStrategy,
    build_representation,
    build_union_representation,
    fixation_regions,
    pyramid_regions,
)
from .sparse import Dictionary, SparseCodingConfig, encode_batch, learn_dictionary

log = logging.getLogger(__name__)


class Strategy(enum.Enum):
    PYRAMID_MAX = "pyramid-max"
    PYRAMID_AVG = "pyramid-avg"
    FIXATION_MAX = "fix-max"
    FIXATION_AVG = "fix-avg"

    @property
    def pooling(self):
        return PoolingStrategy.MAX if self.value.endswith("max") else PoolingStrategy.AVERAGE

    @property
    def uses_fixations(self):
        return self.value.startswith("fix")


@dataclass(frozen=True)
class SvmConfig:
    c_reg: float = 1.0
    epochs: int = 50
    seed: int = 0

    def __post_init__(self):
        if not self.c_reg > 0:
            raise ValueError("c_reg must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass(frozen=True)
class TrainedModel:
    class_labels: tuple
    weights: np.ndarray          # (classes, dim + 1); last column is the bias
    training_config: SvmConfig = SvmConfig()

    @property
    def dim(self):
        return self.weights.shape[1] - 1

    def decision_function(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValidationError(f"feature dimension {X.shape[1]} != model dimension {self.dim}")
        return X @ self.weights[:, :-1].T + self.weights[:, -1]

    def predict(self, X):
        # argmax returns the first maximum: ties go to the earlier class
        idx = np.argmax(self.decision_function(X), axis=1)
        return [self.class_labels[i] for i in idx]


def train_svm(X, y, cfg: SvmConfig = SvmConfig(), class_order=None) -> TrainedModel:
    """One-vs-rest hinge-loss SVMs trained jointly by Pegasos-style SGD.

    Each binary problem minimises ``0.5*||w||^2 + c_reg * sum(hinge)`` over
    the bias-augmented features, i.e. regularisation ``lam = 1/(c_reg*n)``
    with step ``1/(lam*t)``.  All classes share one seeded sample order.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = list(y)
    if len(y) != X.shape[0]:
        raise ValidationError("sample/label count mismatch")
    labels = tuple(class_order) if class_order is not None else tuple(sorted(set(y)))
    if len(set(labels)) < 2 or len(set(y)) < 2:
        raise ValidationError("training needs at least two classes")
    if set(y) - set(labels):
        raise ValidationError("labels outside class_order")
    n = X.shape[0]
    Xa = np.hstack([X, np.ones((n, 1))])
    Y = np.array([[1.0 if yi == c else -1.0 for c in labels] for yi in y])  # (n, K)
    lam = 1.0 / (cfg.c_reg * n)
    W = np.zeros((len(labels), Xa.shape[1]))
    rng = np.random.default_rng(cfg.seed)
    t = 0
    for _ in range(cfg.epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            xi, yi = Xa[i], Y[i]
            violated = yi * (W @ xi) < 1.0
            W *= 1.0 - eta * lam
            W[violated] += eta * yi[violated, None] * xi[None, :]
    return TrainedModel(labels, W, cfg)


def save_model(model: TrainedModel, path, sidecar_path=None):
    binio.write_bytes_atomic(path, binio.encode_svm(model.weights))
    meta = {
        "class_labels": list(model.class_labels),
        "dim": model.dim,
        "c_reg": model.training_config.c_reg,
        "epochs": model.training_config.epochs,
        "seed": model.training_config.seed,
    }
    binio.write_text_atomic(
        sidecar_path or f"{path}.json", json.dumps(meta, indent=2, sort_keys=True) + "\n"
    )


def load_model(path, sidecar_path=None) -> TrainedModel:
    weights = binio.read_svm_weights(path)
    with open(sidecar_path or f"{path}.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    labels = tuple(meta["class_labels"])
    if len(labels) != weights.shape[0]:
        raise ValidationError("model sidecar class count does not match weights")
    cfg = SvmConfig(meta.get("c_reg", 1.0), meta.get("epochs", 50), meta.get("seed", 0))
    return TrainedModel(labels, weights, cfg)


# --------------------------------------------------------------------------
# evaluation harness


@dataclass
class ImageRecord:
    """Everything the classifier needs about one labelled image."""

    image_id: str
    label: str
    width: int
    height: int
    centers: np.ndarray                       # (m, 2) descriptor centres
    descriptors: Optional[np.ndarray] = None  # (m, d)
    codes: Optional[np.ndarray] = None        # (m, l), precomputed sparse codes
    fixations: dict = field(default_factory=dict)  # Condition -> list of Fixation


@dataclass(frozen=True)
class ExperimentConfig:
    dict_size: int = 256
    sparse: SparseCodingConfig = SparseCodingConfig()
    svm: SvmConfig = SvmConfig()
    levels: tuple = DEFAULT_LEVELS
    window: int = DEFAULT_WINDOW
    window_scale: float = 1.0
    train_fraction: float = 0.5
    max_dict_samples: int = 50_000
    fallback_pyramid: bool = False


@dataclass(frozen=True)
class EvalReport:
    strategy: Strategy
    condition: Optional[Condition]
    class_labels: tuple
    per_class_accuracy: dict          # label -> (mean, std)
    average_accuracy: tuple           # (mean, std) of the unweighted per-class mean
    pooled_accuracy: tuple            # (mean, std) of plain test accuracy
    repetitions: int
    runs: tuple = ()                  # per-repetition {label: acc} dicts

    @property
    def row_name(self):
        if self.condition is None:
            return self.strategy.value
        return f"{self.strategy.value}@{self.condition.value}"

    def to_json(self):
        return {
            "strategy": self.strategy.value,
            "condition": None if self.condition is None else self.condition.value,
            "repetitions": self.repetitions,
            "per_class_accuracy": {
                k: {"mean": m, "std": s} for k, (m, s) in self.per_class_accuracy.items()
            },
            "average_accuracy": {"mean": self.average_accuracy[0], "std": self.average_accuracy[1]},
            "pooled_accuracy": {"mean": self.pooled_accuracy[0], "std": self.pooled_accuracy[1]},
            "runs": [dict(r) for r in self.runs],
        }


def stratified_split(labels, train_fraction, rng):
    """Indices (train, test); each class is split separately, at least one each side."""
    labels = list(labels)
    train, test = [], []
    for c in sorted(set(labels)):
        idx = np.array([i for i, y in enumerate(labels) if y == c])
        idx = idx[rng.permutation(idx.size)]
        k = int(round(train_fraction * idx.size))
        k = min(max(k, 1), idx.size - 1) if idx.size > 1 else idx.size
        train.extend(idx[:k].tolist())
        test.extend(idx[k:].tolist())
    return sorted(train), sorted(test)


def check_coverage(records, strategy: Strategy, condition, fallback=False):
    if not strategy.uses_fixations:
        return
    if condition is None:
        raise ValidationError("fixation strategies need a viewing condition")
    missing = [r.image_id for r in records if not r.fixations.get(condition)]
    if missing and not fallback:
        raise CoverageError(missing, f"no {condition.value} fixations for images")


def represent(record: ImageRecord, codes, strategy: Strategy, condition, cfg: ExperimentConfig):
    if strategy.uses_fixations:
        fixes = record.fixations.get(condition) or []
        if fixes:
            window = int(round(cfg.window * cfg.window_scale))
            try:
                regions = fixation_regions(fixes, window, record.width, record.height)
                return build_union_representation(codes, record.centers, regions, strategy.pooling)
            except EmptyInputError:
                if not cfg.fallback_pyramid:
                    raise CoverageError([record.image_id], "fixation windows fall outside image")
        elif not cfg.fallback_pyramid:
            raise CoverageError([record.image_id])
        # explicit fallback: whole image as a single window keeps the dimension
        whole = pyramid_regions(record.width, record.height, (1,))
        return build_union_representation(codes, record.centers, whole, strategy.pooling)
    regions = pyramid_regions(record.width, record.height, cfg.levels)
    return build_representation(codes, record.centers, regions, strategy.pooling)


def _encode_records(records, D, sparse_cfg):
    """Sparse-code every image's descriptors in one batch (order preserved)."""
    blocks = [r.descriptors for r in records]
    counts = [b.shape[0] for b in blocks]
    allcodes = encode_batch(np.vstack(blocks), D, sparse_cfg)
    out, start = [], 0
    for c in counts:
        out.append(allcodes[start:start + c])
        start += c
    return out


def _mean_std(values):
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())


def run_experiments(records, plans, repetitions=5, seed=0,
                    cfg: ExperimentConfig = ExperimentConfig(), dictionary: Dictionary = None):
    """Evaluate several (strategy, condition) plans on shared splits.

    Per repetition: a seeded stratified split; unless ``dictionary`` is
    given (or codes are precomputed), a dictionary learned on training-image
    descriptors only; one SVM per plan.  Returns one EvalReport per plan.
    """
    records = list(records)
    if not records:
        raise ValidationError("no labelled images")
    for strategy, condition in plans:
        check_coverage(records, strategy, condition, cfg.fallback_pyramid)
    labels = [r.label for r in records]
    class_labels = tuple(sorted(set(labels)))
    if len(class_labels) < 2:
        raise ValidationError("need at least two classes")
    precomputed = all(r.codes is not None for r in records)
    if not precomputed and any(r.descriptors is None for r in records):
        raise ValidationError("images need descriptors or precomputed codes")

    runs = {plan: [] for plan in plans}
    pooled = {plan: [] for plan in plans}
    for rep in range(repetitions):
        rng = np.random.default_rng([seed, rep])
        train, test = stratified_split(labels, cfg.train_fraction, rng)
        if precomputed:
            codes = [r.codes for r in records]
        else:
            D = dictionary
            if D is None:
                pool_X = np.vstack([records[i].descriptors for i in train])
                if pool_X.shape[0] > cfg.max_dict_samples:
                    pick = rng.choice(pool_X.shape[0], cfg.max_dict_samples, replace=False)
                    pool_X = pool_X[np.sort(pick)]
                sc = SparseCodingConfig(
                    cfg.sparse.lambda1, cfg.sparse.max_outer_iters, cfg.sparse.encode_tolerance,
                    int(rng.integers(2**31)), cfg.sparse.max_sweeps,
                )
                D, _ = learn_dictionary(pool_X, cfg.dict_size, sc)
            codes = _encode_records(records, D, cfg.sparse)
        svm_cfg = SvmConfig(cfg.svm.c_reg, cfg.svm.epochs, int(rng.integers(2**31)))
        for plan in plans:
            strategy, condition = plan
            X = np.vstack([represent(r, c, strategy, condition, cfg)
                           for r, c in zip(records, codes)])
            model = train_svm(X[train], [labels[i] for i in train], svm_cfg, class_labels)
            pred = model.predict(X[test])
            truth = [labels[i] for i in test]
            acc = {}
            for c in class_labels:
                hits = [p == t for p, t in zip(pred, truth) if t == c]
                acc[c] = sum(hits) / len(hits) if hits else float("nan")
            runs[plan].append(acc)
            pooled[plan].append(sum(p == t for p, t in zip(pred, truth)) / len(truth))

    reports = []
    for plan in plans:
        strategy, condition = plan
        per_class = {c: _mean_std([r[c] for r in runs[plan]]) for c in class_labels}
        avg = _mean_std([np.nanmean([r[c] for c in class_labels]) for r in runs[plan]])
        reports.append(EvalReport(
            strategy, condition if strategy.uses_fixations else None, class_labels,
            per_class, avg, _mean_std(pooled[plan]), repetitions, tuple(runs[plan]),
        ))
    return reports


def run_experiment(records, strategy: Strategy, condition=None, repetitions=5, seed=0,
                   cfg: ExperimentConfig = ExperimentConfig(), dictionary=None) -> EvalReport:
    return run_experiments(records, [(strategy, condition)], repetitions, seed, cfg, dictionary)[0]


def records_from_dataset(dataset, descriptor_sets, codes=None):
    """ImageRecords for single-class annotated images that have descriptors.

    Fixations per condition are the union of every subject's preprocessed
    fixations on the image.  ``codes`` optionally maps image_id -> (m, l).
    """
    by_image = {}
    for sp in dataset.paths_for():
        if not sp.preprocessed:
            raise ValidationError(f"scan path {sp.key} is not preprocessed")
        by_image.setdefault(sp.image_id, {}).setdefault(sp.condition, []).extend(sp.fixations)
    records = []
    for ds in descriptor_sets:
        ann = dataset.annotations.get(ds.image_id)
        if ann is None or len(ann.target_labels) != 1:
            continue
        (label,) = ann.target_labels
        records.append(ImageRecord(
            ds.image_id, label, ann.width, ann.height, ds.centers, ds.vectors,
            None if codes is None else codes[ds.image_id],
            by_image.get(ds.image_id, {}),
        ))
    return records
