"""Dense upright gradient-orientation histogram descriptors (SIFT-like).

Each grid patch is split into ``cells x cells`` spatial cells; every cell
holds an ``orientations``-bin histogram of gradient magnitude with linear
interpolation between neighbouring orientation bins.  The concatenated
histogram is L2-normalised.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import binio
from .errors import ValidationError

LUMA = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class DescriptorGridConfig:
    patch_size: int = 16
    stride: int = 8
    cells: int = 4
    orientations: int = 8

    def __post_init__(self):
        if min(self.patch_size, self.stride, self.cells, self.orientations) < 1:
            raise ValueError("descriptor grid parameters must be positive")
        if self.patch_size % self.cells:
            raise ValueError("patch_size must be divisible by cells")

    @property
    def dim(self):
        return self.cells * self.cells * self.orientations


@dataclass(frozen=True)
class DescriptorSet:
    """Descriptors of one image: centers (m, 2) as (x, y) and vectors (m, d)."""

    image_id: str
    centers: np.ndarray
    vectors: np.ndarray

    def __len__(self):
        return len(self.vectors)


def load_image(path) -> np.ndarray:
    """Read an 8-bit PGM/PPM as a float grid in [0, 1] (colour -> luminance)."""
    from PIL import Image

    with Image.open(path) as im:
        if im.mode == "L":
            return np.asarray(im, dtype=float) / 255.0
        rgb = np.asarray(im.convert("RGB"), dtype=float) / 255.0
    return rgb @ np.asarray(LUMA)


def _gradients(img):
    padded = np.pad(img, 1, mode="edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    return gx, gy


def _orientation_channels(img, n_bins):
    """(H, W, n_bins) gradient magnitude split linearly across orientation bins."""
    gx, gy = _gradients(img)
    mag = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), 2.0 * np.pi)
    pos = theta / (2.0 * np.pi) * n_bins          # bin centres at k * 2pi / n_bins
    lo = np.floor(pos).astype(int) % n_bins
    frac = pos - np.floor(pos)
    hi = (lo + 1) % n_bins
    channels = np.zeros(img.shape + (n_bins,))
    rows, cols = np.indices(img.shape)
    np.add.at(channels, (rows, cols, lo), mag * (1.0 - frac))
    np.add.at(channels, (rows, cols, hi), mag * frac)
    return channels


def grid_origins(width, height, cfg: DescriptorGridConfig):
    xs = np.arange(0, width - cfg.patch_size + 1, cfg.stride)
    ys = np.arange(0, height - cfg.patch_size + 1, cfg.stride)
    return xs, ys


def dense_descriptors(img, cfg: DescriptorGridConfig = DescriptorGridConfig(),
                      image_id="") -> DescriptorSet:
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise ValidationError("expected a 2-D grayscale image")
    height, width = img.shape
    if width < cfg.patch_size or height < cfg.patch_size:
        raise ValidationError(
            f"image {image_id or ''} ({width}x{height}) smaller than patch {cfg.patch_size}"
        )
    channels = _orientation_channels(img, cfg.orientations)
    integral = np.zeros((height + 1, width + 1, cfg.orientations))
    integral[1:, 1:] = channels.cumsum(0).cumsum(1)

    xs, ys = grid_origins(width, height, cfg)
    oy, ox = np.meshgrid(ys, xs, indexing="ij")
    oy, ox = oy.ravel(), ox.ravel()
    cell = cfg.patch_size // cfg.cells
    hists = []
    for cy in range(cfg.cells):
        for cx in range(cfg.cells):
            y0, x0 = oy + cy * cell, ox + cx * cell
            y1, x1 = y0 + cell, x0 + cell
            hists.append(
                integral[y1, x1] - integral[y0, x1] - integral[y1, x0] + integral[y0, x0]
            )
    vectors = np.maximum(np.concatenate(hists, axis=1), 0.0)
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    # tiny residues from the integral image count as empty patches
    empty = norms[:, 0] <= 1e-12 * max(1.0, cfg.patch_size ** 2)
    vectors = np.where(empty[:, None], 0.0, vectors / np.where(norms > 0, norms, 1.0))
    half = cfg.patch_size / 2.0
    centers = np.column_stack([ox + half, oy + half]).astype(float)
    return DescriptorSet(image_id, centers, vectors)


def save_descriptors(sets, path, d=None):
    sets = list(sets)
    if d is None:
        if not sets:
            raise ValueError("cannot infer descriptor dimension from no images")
        d = sets[0].vectors.shape[1]
    binio.write_bytes_atomic(
        path, binio.encode_descriptors(((s.image_id, s.centers, s.vectors) for s in sets), d)
    )


def load_descriptors(path) -> list[DescriptorSet]:
    """Read a GDSC file; every record shares the header's dimension."""
    _, records = binio.read_descriptors(Path(path))
    return [DescriptorSet(image_id, centers, vectors) for image_id, centers, vectors in records]
