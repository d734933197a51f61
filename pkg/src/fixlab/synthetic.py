"""Planted synthetic data for exercising the pipeline end to end.

Each image holds one target object whose descriptors carry one of its
class's prototype patterns.  Elsewhere descriptors are clutter drawn from
generic background patterns, plus decoys: prototypes of arbitrary classes
placed well away from the object.  Every descriptor gets small positive
noise.  Simulated viewers fixate the object, with visual search straying
less than free viewing, so pooling around fixations sees the class
evidence while whole-image pooling also sees the decoys.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .descriptors import DescriptorGridConfig, DescriptorSet, grid_origins
from .gaze import BoundingBox, Condition, Dataset, Fixation, ImageAnnotation, ScanPath

CLASSES = ("bird", "cat", "cow", "dog", "horse", "sheep")


@dataclass(frozen=True)
class PlantedBenchmark:
    dataset: Dataset                 # raw scan paths (not preprocessed)
    descriptors: list                # DescriptorSet per image, dataset order
    labels: dict                     # image_id -> class
    prototypes: np.ndarray           # (classes, prototypes_per_class, d)


def _unit(v):
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.where(n > 0, n, 1.0)


def _sparse_patterns(rng, count, d, density=0.3):
    pats = np.abs(rng.normal(size=(count, d))) * (rng.random((count, d)) < density)
    # guarantee at least one active entry per pattern
    pats[np.arange(count), rng.integers(0, d, size=count)] += 1.0
    return _unit(pats)


def _scanpath(rng, image_id, subject, condition, box, width, height, n_fix, wander):
    x0, y0, x1, y1 = box
    points = [(width / 2.0, height / 2.0)]   # start fixation, dropped by preprocessing
    for _ in range(n_fix):
        if rng.random() < wander:
            points.append((rng.uniform(0, width - 1), rng.uniform(0, height - 1)))
        else:
            points.append((rng.uniform(x0 + 2, x1 - 2), rng.uniform(y0 + 2, y1 - 2)))
    mean_dur = 0.30 if condition is Condition.FREE_VIEWING else 0.25
    onset = 0.0
    fixes = []
    for i, (x, y) in enumerate(points):
        dur = float(np.clip(rng.normal(mean_dur, 0.05), 0.08, 0.8))
        fixes.append(Fixation(round(x, 2), round(y, 2), round(onset, 3), round(dur, 3), i))
        onset += dur + 0.04
    return ScanPath(image_id, subject, condition, tuple(fixes))


def make_planted_benchmark(per_class=60, classes=CLASSES, width=96, height=96, d=32,
                           object_size=24, subjects=4, prototypes_per_class=3,
                           background_patterns=40, decoy_rate=0.15, noise=0.03,
                           wander=None, grid=DescriptorGridConfig(16, 8, 4, 2),
                           seed=0) -> PlantedBenchmark:
    """Build the planted benchmark; ``grid`` only fixes descriptor placement.

    ``wander`` maps each Condition to the chance that a fixation lands at a
    random spot instead of on the object.
    """
    if wander is None:
        wander = {Condition.FREE_VIEWING: 0.08, Condition.VISUAL_SEARCH: 0.02}
    rng = np.random.default_rng(seed)
    k = len(classes)
    prototypes = _sparse_patterns(rng, k * prototypes_per_class, d).reshape(
        k, prototypes_per_class, d)
    background = _sparse_patterns(rng, background_patterns, d)
    xs, ys = grid_origins(width, height, grid)
    oy, ox = np.meshgrid(ys, xs, indexing="ij")
    centers = np.column_stack([ox.ravel(), oy.ravel()]).astype(float) + grid.patch_size / 2.0

    annotations, paths, sets, labels = {}, [], [], {}
    half = object_size / 2.0
    for ci, cls in enumerate(classes):
        for n in range(per_class):
            image_id = f"{cls}_{n:03d}"
            cx = rng.uniform(half + 4, width - half - 4)
            cy = rng.uniform(half + 4, height - half - 4)
            box = (round(cx - half), round(cy - half), round(cx + half), round(cy + half))
            annotations[image_id] = ImageAnnotation(
                image_id, width, height, (BoundingBox(cls, *box),)
            )
            labels[image_id] = cls

            inside = ((centers[:, 0] >= box[0]) & (centers[:, 0] <= box[2])
                      & (centers[:, 1] >= box[1]) & (centers[:, 1] <= box[3]))
            far = np.maximum(np.abs(centers[:, 0] - cx), np.abs(centers[:, 1] - cy)) > object_size
            vecs = background[rng.integers(0, background_patterns, size=len(centers))]
            decoy = far & (rng.random(len(centers)) < decoy_rate)
            flat = prototypes.reshape(-1, d)
            vecs[decoy] = flat[rng.integers(0, len(flat), size=int(decoy.sum()))]
            vecs[inside] = prototypes[ci, rng.integers(0, prototypes_per_class,
                                                       size=int(inside.sum()))]
            vecs = vecs + noise * np.abs(rng.normal(size=vecs.shape))
            sets.append(DescriptorSet(image_id, centers.copy(), _unit(vecs)))

            for s in range(subjects):
                for cond in (Condition.FREE_VIEWING, Condition.VISUAL_SEARCH):
                    paths.append(_scanpath(rng, image_id, f"s{s:02d}", cond, box, width,
                                           height, int(rng.integers(3, 7)), wander[cond]))
    return PlantedBenchmark(Dataset(annotations, paths), sets, labels, prototypes)
