"""Visual-angle conversion and Gaussian fixation density maps."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, EmptyInputError, ValidationError

INCH_CM = 2.54


@dataclass(frozen=True)
class ViewingGeometry:
    viewing_distance: float   # cm
    screen_width_cm: float
    screen_height_cm: float
    resolution_x: int
    resolution_y: int

    def __post_init__(self):
        for name in ("viewing_distance", "screen_width_cm", "screen_height_cm",
                     "resolution_x", "resolution_y"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"ViewingGeometry.{name} must be > 0")

    @classmethod
    def from_diagonal(cls, diagonal_in, aspect_w, aspect_h, distance_cm, res_x, res_y):
        diag_cm = diagonal_in * INCH_CM
        hyp = math.hypot(aspect_w, aspect_h)
        return cls(distance_cm, diag_cm * aspect_w / hyp, diag_cm * aspect_h / hyp, res_x, res_y)

    @property
    def pixels_per_cm(self):
        return self.resolution_x / self.screen_width_cm


# 17" panel assumed 4:3 at 60 cm, driven at 1280x1024.
PET_GEOMETRY = ViewingGeometry.from_diagonal(17.0, 4, 3, 60.0, 1280, 1024)


def degrees_to_pixels(g: ViewingGeometry, angle: float) -> float:
    """On-screen extent (horizontal pixels) subtending ``angle`` degrees."""
    if not 0 < angle < 90:
        raise ValueError(f"angle must lie in (0, 90) degrees, got {angle}")
    extent_cm = 2.0 * g.viewing_distance * math.tan(math.radians(angle) / 2.0)
    return g.pixels_per_cm * extent_cm


@dataclass(frozen=True)
class DensityMap:
    image_id: str
    width: int
    height: int
    values: np.ndarray   # shape (height, width)
    sigma_px: float


def _gaussian_1d(center, sigma, size):
    """Truncated (3 sigma) 1-D Gaussian sampled on the integer grid [0, size)."""
    lo = max(0, math.ceil(center - 3.0 * sigma))
    hi = min(size - 1, math.floor(center + 3.0 * sigma))
    if hi < lo:
        return lo, np.zeros(0)
    grid = np.arange(lo, hi + 1, dtype=float)
    g = np.exp(-0.5 * ((grid - center) / sigma) ** 2) / (math.sqrt(2.0 * math.pi) * sigma)
    return lo, g


def density_map(fixations, ann, g: ViewingGeometry, bandwidth=2.0,
                duration_weighted=False) -> DensityMap:
    """Sum of unit-mass Gaussians (sigma = ``bandwidth`` degrees) at fixations.

    The kernel is separable and truncated to a 3-sigma square, so each
    fixation contributes an outer product of two 1-D profiles.
    """
    fixations = list(fixations)
    if not fixations:
        raise EmptyInputError(f"image {ann.image_id}: no fixations for density map")
    if not bandwidth > 0:
        raise ValueError("bandwidth must be > 0")
    sigma = degrees_to_pixels(g, bandwidth)
    values = np.zeros((ann.height, ann.width))
    for fix in fixations:
        w = fix.duration if duration_weighted else 1.0
        x0, gx = _gaussian_1d(fix.x, sigma, ann.width)
        y0, gy = _gaussian_1d(fix.y, sigma, ann.height)
        if gx.size and gy.size:
            values[y0:y0 + gy.size, x0:x0 + gx.size] += w * np.outer(gy, gx)
    return DensityMap(ann.image_id, ann.width, ann.height, values, sigma)


def normalize_for_display(m: DensityMap) -> DensityMap:
    peak = float(m.values.max()) if m.values.size else 0.0
    if not peak > 0:
        raise DegenerateInputError(f"density map for {m.image_id} has no positive value")
    return DensityMap(m.image_id, m.width, m.height, m.values / peak, m.sigma_px)
