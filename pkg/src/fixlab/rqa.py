"""Recurrence quantification of a single scan path.

Only the upper triangle (i < j) of the symmetric recurrence matrix is
counted.  With R recurrent cells there:

* recurrence  = 100 * 2R / (n(n-1))
* determinism = 100 * (cells on diagonal lines) / R
* laminarity  = 100 * (cells on horizontal lines + cells on vertical lines) / 2R
* crom        = 100 * sum (j - i) * r_ij / ((n - 1) R)

A line is a maximal run of recurrent cells of length >= ``min_line_length``.
When ``count_complete_runs`` is set, a run that spans its whole available
extent (from the border or main diagonal to the border) also counts, since
it cannot be seen to end early; this makes fully recurrent paths saturate
at 100.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TooShortError


@dataclass(frozen=True)
class RqaConfig:
    radius: float
    min_line_length: int = 2
    count_complete_runs: bool = True

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be > 0")
        if self.min_line_length < 2:
            raise ValueError("min_line_length must be >= 2")


@dataclass(frozen=True)
class RqaMeasures:
    recurrence: float
    determinism: float
    laminarity: float
    crom: float


def recurrence_matrix(sp, cfg: RqaConfig) -> np.ndarray:
    """Boolean n x n matrix; True where two distinct fixations lie within ``radius``."""
    if len(sp.fixations) < 2:
        raise TooShortError(
            f"scan path {sp.key} has {len(sp.fixations)} fixation(s); RQA needs >= 2"
        )
    xy = np.array([[f.x, f.y] for f in sp.fixations], dtype=float)
    dist = np.sqrt(((xy[:, None, :] - xy[None, :, :]) ** 2).sum(axis=2))
    cells = dist <= cfg.radius
    np.fill_diagonal(cells, False)
    return cells


def _line_cells(seq, min_len, count_complete):
    """Number of True entries of ``seq`` lying on qualifying runs."""
    total = 0
    run = 0
    for v in list(seq) + [False]:
        if v:
            run += 1
            continue
        if run and (run >= min_len or (count_complete and run == len(seq))):
            total += run
        run = 0
    return total


def rqa_measures(cells, cfg: RqaConfig) -> RqaMeasures:
    cells = np.asarray(cells, dtype=bool)
    n = cells.shape[0]
    upper = np.triu(cells, 1)
    r = int(upper.sum())
    if r == 0:
        return RqaMeasures(0.0, 0.0, 0.0, 0.0)
    L, full = cfg.min_line_length, cfg.count_complete_runs

    diag = sum(_line_cells(np.diagonal(cells, k), L, full) for k in range(1, n))
    horiz = sum(_line_cells(cells[i, i + 1:], L, full) for i in range(n - 1))
    vert = sum(_line_cells(cells[:j, j], L, full) for j in range(1, n))
    i_idx, j_idx = np.nonzero(upper)
    lag = int((j_idx - i_idx).sum())

    return RqaMeasures(
        recurrence=100.0 * 2 * r / (n * (n - 1)),
        determinism=100.0 * diag / r,
        laminarity=100.0 * (horiz + vert) / (2 * r),
        crom=100.0 * lag / ((n - 1) * r),
    )


def analyze(sp, cfg: RqaConfig) -> RqaMeasures:
    return rqa_measures(recurrence_matrix(sp, cfg), cfg)
