"""Pooling regions and max/average pooling of sparse codes.

Regions are half-open pixel rectangles ``[xmin, xmax) x [ymin, ymax)``; a
code belongs to a region when its descriptor centre does.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError

DEFAULT_LEVELS = (1, 2, 4)
DEFAULT_WINDOW = 30


class RegionOrigin(enum.Enum):
    PYRAMID_CELL = "pyramid"
    FIXATION_WINDOW = "fixation"


class PoolingStrategy(enum.Enum):
    MAX = "max"
    AVERAGE = "avg"


@dataclass(frozen=True)
class PoolingRegion:
    xmin: float
    ymin: float
    xmax: float
    ymax: float
    origin: RegionOrigin = RegionOrigin.PYRAMID_CELL

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError(f"degenerate pooling region {self}")

    def mask(self, centers):
        centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        x, y = centers[:, 0], centers[:, 1]
        return (x >= self.xmin) & (x < self.xmax) & (y >= self.ymin) & (y < self.ymax)


def pyramid_regions(width, height, levels=DEFAULT_LEVELS):
    """Uniform k x k grids for each pyramid level, coarse to fine, row-major."""
    if width <= 0 or height <= 0:
        raise ValueError("image size must be positive")
    regions = []
    for k in levels:
        xs = np.linspace(0.0, width, k + 1)
        ys = np.linspace(0.0, height, k + 1)
        for r in range(k):
            for c in range(k):
                regions.append(PoolingRegion(xs[c], ys[r], xs[c + 1], ys[r + 1]))
    return regions


def fixation_regions(fixations, window=DEFAULT_WINDOW, width=None, height=None):
    """One ``window``-pixel square per fixation, clipped to the image.

    The square spans pixels ``c - (window-1)//2 .. c - (window-1)//2 + window - 1``
    around the fixation's nearest pixel ``c``.
    """
    if window <= 0:
        raise ValueError("window must be > 0")
    fixations = list(fixations)
    if not fixations:
        raise EmptyInputError("no fixations to build pooling windows from")
    window = int(round(window))
    back = (window - 1) // 2
    regions = []
    for f in fixations:
        cx, cy = int(np.floor(f.x + 0.5)), int(np.floor(f.y + 0.5))
        x0, y0 = cx - back, cy - back
        x1, y1 = x0 + window, y0 + window
        if width is not None:
            x0, x1 = max(0, x0), min(width, x1)
        if height is not None:
            y0, y1 = max(0, y0), min(height, y1)
        if x0 < x1 and y0 < y1:
            regions.append(PoolingRegion(x0, y0, x1, y1, RegionOrigin.FIXATION_WINDOW))
    if not regions:
        raise EmptyInputError("every fixation window fell outside the image")
    return regions


def pool_mask(codes, mask, strategy: PoolingStrategy):
    codes = np.asarray(codes, dtype=float)
    selected = codes[np.asarray(mask, dtype=bool)]
    if selected.shape[0] == 0:
        return np.zeros(codes.shape[1])
    if strategy is PoolingStrategy.MAX:
        return np.abs(selected).max(axis=0)
    return selected.mean(axis=0)


def pool(codes, centers, region: PoolingRegion, strategy: PoolingStrategy):
    """Pool the codes whose centres lie in ``region``; empty region -> zeros."""
    return pool_mask(codes, region.mask(centers), strategy)


def _l2(vec):
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


def build_representation(codes, centers, regions, strategy: PoolingStrategy):
    """Concatenate per-region pooled codes and L2-normalise the result."""
    if not regions:
        raise ValueError("need at least one region")
    parts = [pool(codes, centers, r, strategy) for r in regions]
    return _l2(np.concatenate(parts))


def build_union_representation(codes, centers, regions, strategy: PoolingStrategy):
    """Pool once over the codes covered by any region (each code counted once).

    Fixation windows vary in number per image, so fixation pooling uses this
    fixed-length (l-dimensional) form.
    """
    if not regions:
        raise ValueError("need at least one region")
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    covered = np.zeros(len(centers), dtype=bool)
    for r in regions:
        covered |= r.mask(centers)
    return _l2(pool_mask(codes, covered, strategy))
