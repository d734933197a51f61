"""Per-scan-path gaze statistics, condition summaries and Welch's t-test."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from .errors import DegenerateInputError, ExcludedImageError, ExcludedPathError, ValidationError
from .gaze import Condition, Dataset, ImageAnnotation, ScanPath

DEFAULT_K = 5

METRICS = (
    "in_box_proportion",
    "targets_fixated_proportion",
    "saccadic_latency",
    "per_target_fixation_duration",
)


@dataclass(frozen=True)
class ScanPathStats:
    in_box_proportion: float
    targets_fixated_proportion: float
    saccadic_latency: Optional[float]   # seconds; None when never reached
    per_target_fixation_duration: float  # seconds


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float
    n: int


@dataclass(frozen=True)
class ConditionSummary:
    condition: Condition
    n: int
    metrics: dict  # metric name -> MetricSummary


@dataclass(frozen=True)
class TTestResult:
    t_statistic: float
    degrees_of_freedom: float
    p_value: float


def _require_nonempty(sp):
    if sp.is_empty:
        raise ExcludedPathError(f"scan path {sp.key} has no fixations after preprocessing")


def _require_targets(ann):
    if ann.target_count == 0:
        raise ExcludedImageError(f"image {ann.image_id} has no target objects")


def first_k_fixations(sp: ScanPath, k: int = DEFAULT_K):
    if k < 1:
        raise ValueError("k must be >= 1")
    return list(sp.fixations[:k])


def _in_any(fix, boxes):
    return any(b.contains(fix.x, fix.y) for b in boxes)


def in_box_proportion(sp: ScanPath, ann: ImageAnnotation, k: int = DEFAULT_K) -> float:
    """Fraction of the first ``k`` fixations that land in any target box."""
    _require_nonempty(sp)
    fixations = first_k_fixations(sp, k)
    targets = ann.targets
    return sum(_in_any(f, targets) for f in fixations) / len(fixations)


def targets_fixated_proportion(sp: ScanPath, ann: ImageAnnotation, k: int = DEFAULT_K) -> float:
    """Fraction of target boxes hit by at least one of the first ``k`` fixations."""
    _require_targets(ann)
    fixations = first_k_fixations(sp, k)
    hit = sum(any(b.contains(f.x, f.y) for f in fixations) for b in ann.targets)
    return hit / ann.target_count


def saccadic_latency(sp: ScanPath, ann: ImageAnnotation) -> Optional[float]:
    """Onset of the fixation at which ceil(T/2) distinct targets have been fixated."""
    _require_targets(ann)
    needed = math.ceil(ann.target_count / 2)
    targets = ann.targets
    fixated = set()
    for fix in sp.fixations:
        fixated.update(i for i, b in enumerate(targets) if b.contains(fix.x, fix.y))
        if len(fixated) >= needed:
            return fix.onset
    return None


def per_target_fixation_duration(sp: ScanPath, ann: ImageAnnotation) -> float:
    """Total fixation time on target boxes divided by the number of targets.

    A fixation inside overlapping targets counts towards each of them.
    """
    _require_targets(ann)
    targets = ann.targets
    dwell = sum(
        f.duration for f in sp.fixations for b in targets if b.contains(f.x, f.y)
    )
    return dwell / len(targets)


def scanpath_stats(sp: ScanPath, ann: ImageAnnotation, k: int = DEFAULT_K) -> ScanPathStats:
    _require_nonempty(sp)
    _require_targets(ann)
    return ScanPathStats(
        in_box_proportion(sp, ann, k),
        targets_fixated_proportion(sp, ann, k),
        saccadic_latency(sp, ann),
        per_target_fixation_duration(sp, ann),
    )


def _mean_std(values):
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())


def image_filter(name):
    """Image subset predicates for the aggregate statistics."""
    filters = {
        "all": lambda ann: True,
        "multi": lambda ann: ann.target_count >= 2,
        "single": lambda ann: ann.target_count == 1,
    }
    try:
        return filters[name]
    except KeyError:
        raise ValueError(f"unknown image subset {name!r}") from None


def eligible_paths(dataset: Dataset, condition=None, subset="all"):
    """Non-empty preprocessed paths on images with >= 1 target, in dataset order."""
    keep = image_filter(subset)
    out = []
    for sp in dataset.paths_for(condition):
        ann = dataset.annotations[sp.image_id]
        if ann.target_count and keep(ann):
            if not sp.preprocessed:
                raise ValidationError(f"scan path {sp.key} is not preprocessed")
            out.append(sp)
    return out


def summarize_condition(dataset: Dataset, condition: Condition, k: int = DEFAULT_K,
                        subset="all") -> ConditionSummary:
    paths = eligible_paths(dataset, condition, subset)
    if not paths:
        raise ValidationError(f"no eligible scan paths for condition {condition.value}")
    per_path = [scanpath_stats(sp, dataset.annotations[sp.image_id], k) for sp in paths]
    metrics = {}
    for name in METRICS:
        vals = [getattr(s, name) for s in per_path if getattr(s, name) is not None]
        if vals:
            mean, std = _mean_std(vals)
            metrics[name] = MetricSummary(mean, std, len(vals))
        else:
            metrics[name] = MetricSummary(math.nan, math.nan, 0)
    return ConditionSummary(condition, len(paths), metrics)


def metric_samples(dataset: Dataset, condition: Condition, metric: str,
                   k: int = DEFAULT_K, subset="all"):
    """Per-path values of one metric (absent latencies dropped)."""
    values = []
    for sp in eligible_paths(dataset, condition, subset):
        v = getattr(scanpath_stats(sp, dataset.annotations[sp.image_id], k), metric)
        if v is not None:
            values.append(v)
    return values


def per_fixation_duration_curve(paths, max_index: int):
    """(mean, std, n) of the i-th fixation duration, for i < ``max_index``.

    The list stops at the first index no path reaches.
    """
    paths = [sp for sp in paths if not sp.is_empty]
    if not paths:
        raise ValidationError("no non-empty scan paths")
    curve = []
    for i in range(max_index):
        durs = [sp.fixations[i].duration for sp in paths if len(sp.fixations) > i]
        if not durs:
            break
        mean, std = _mean_std(durs)
        curve.append((mean, std, len(durs)))
    return curve


def classwise_in_box(dataset: Dataset, k: int = DEFAULT_K):
    """class -> condition -> (mean, std, n) of in-box proportion on single-class images."""
    grouped: dict[str, dict[Condition, list]] = {}
    for sp in dataset.paths_for():
        ann = dataset.annotations[sp.image_id]
        labels = ann.target_labels
        if len(labels) != 1:
            continue
        (label,) = labels
        grouped.setdefault(label, {}).setdefault(sp.condition, []).append(
            in_box_proportion(sp, ann, k)
        )
    out = {}
    for label in sorted(grouped):
        out[label] = {}
        for cond in Condition:
            if cond in grouped[label]:
                vals = grouped[label][cond]
                out[label][cond] = (*_mean_std(vals), len(vals))
    return out


def welch_t_test(a, b) -> TTestResult:
    """Two-sided Welch unequal-variance t-test."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least two values")
    ma, mb = a.mean(), b.mean()
    va = a.var(ddof=1) / a.size
    vb = b.var(ddof=1) / b.size
    se2 = va + vb
    if se2 == 0:
        if ma == mb:
            raise DegenerateInputError("both samples are constant with equal means")
        return TTestResult(math.copysign(math.inf, ma - mb), float(a.size + b.size - 2), 0.0)
    t = (ma - mb) / math.sqrt(se2)
    df = se2 ** 2 / (va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1))
    # two-sided tail of Student's t via the regularized incomplete beta
    p = float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))
    return TTestResult(float(t), float(df), min(1.0, max(0.0, p)))
