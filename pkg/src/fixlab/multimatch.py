"""Vector-based scan-path comparison in five dimensions.

Paths are turned into saccade vectors, optionally simplified by merging
short or near-collinear neighbours, aligned by a minimum-cost monotone
path over the vector-difference matrix, and then compared dimension by
dimension on the aligned pairs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TooShortError


@dataclass(frozen=True)
class SaccadeVector:
    dx: float
    dy: float
    start_x: float
    start_y: float
    duration: float  # duration of the fixation the saccade leaves from

    @property
    def amplitude(self):
        return math.hypot(self.dx, self.dy)


@dataclass(frozen=True)
class MultiMatchScore:
    shape: float
    length: float
    direction: float
    position: float
    duration: float

    def as_tuple(self):
        return (self.shape, self.length, self.direction, self.position, self.duration)


@dataclass(frozen=True)
class MultiMatchConfig:
    amplitude_threshold: float
    direction_threshold: float  # degrees
    screen_diagonal: float
    simplification_enabled: bool = True

    def __post_init__(self):
        if self.amplitude_threshold < 0 or self.direction_threshold < 0:
            raise ValueError("simplification thresholds must be >= 0")
        if not self.screen_diagonal > 0:
            raise ValueError("screen_diagonal must be > 0")

    @classmethod
    def for_screen(cls, width, height, amplitude_fraction=0.1, direction_threshold=45.0,
                   simplification_enabled=True):
        diag = math.hypot(width, height)
        return cls(amplitude_fraction * diag, direction_threshold, diag, simplification_enabled)


def to_vectors(sp) -> list[SaccadeVector]:
    fixes = sp.fixations
    if len(fixes) < 2:
        raise TooShortError(f"scan path {sp.key} has {len(fixes)} fixation(s); need >= 2")
    return [
        SaccadeVector(b.x - a.x, b.y - a.y, a.x, a.y, a.duration)
        for a, b in zip(fixes, fixes[1:])
    ]


def _angle_between(ux, uy, vx, vy):
    """Unsigned angle in [0, pi]; 0 if either vector is null."""
    return math.atan2(abs(ux * vy - uy * vx), ux * vx + uy * vy)


def _merge(u: SaccadeVector, v: SaccadeVector) -> SaccadeVector:
    return SaccadeVector(u.dx + v.dx, u.dy + v.dy, u.start_x, u.start_y,
                         u.duration + v.duration)


def simplify(vs, cfg: MultiMatchConfig) -> list[SaccadeVector]:
    """Merge adjacent vectors until no pair qualifies.

    A pair qualifies when its summed vector is shorter than the amplitude
    threshold or the two directions differ by less than the direction
    threshold.  Each left-to-right sweep merges greedily.
    """
    vs = list(vs)
    dir_thresh = math.radians(cfg.direction_threshold)
    changed = True
    while changed and len(vs) > 1:
        changed = False
        out = [vs[0]]
        for v in vs[1:]:
            u = out[-1]
            combined = math.hypot(u.dx + v.dx, u.dy + v.dy)
            if (combined < cfg.amplitude_threshold
                    or _angle_between(u.dx, u.dy, v.dx, v.dy) < dir_thresh):
                out[-1] = _merge(u, v)
                changed = True
            else:
                out.append(v)
        vs = out
    return vs


def _components(vs):
    return np.array([[v.dx, v.dy] for v in vs], dtype=float)


def align(a, b) -> list[tuple[int, int]]:
    """Cheapest monotone lattice path from (0, 0) to (|a|-1, |b|-1).

    Cell cost is the Euclidean norm of the vector difference; on cost ties
    the diagonal step is preferred while backtracking.
    """
    if not a or not b:
        raise ValueError("cannot align an empty vector list")
    ua, ub = _components(a), _components(b)
    cost = np.linalg.norm(ua[:, None, :] - ub[None, :, :], axis=2)
    n, m = cost.shape
    acc = np.full((n, m), np.inf)
    acc[0, 0] = cost[0, 0]
    for i in range(n):
        for j in range(m):
            if i == 0 and j == 0:
                continue
            best = np.inf
            if i and j:
                best = acc[i - 1, j - 1]
            if i:
                best = min(best, acc[i - 1, j])
            if j:
                best = min(best, acc[i, j - 1])
            acc[i, j] = cost[i, j] + best

    i, j = n - 1, m - 1
    path = [(i, j)]
    while i or j:
        if i and j and acc[i - 1, j - 1] <= min(
            acc[i - 1, j], acc[i, j - 1]
        ):
            i, j = i - 1, j - 1
        elif i and (not j or acc[i - 1, j] <= acc[i, j - 1]):
            i -= 1
        else:
            j -= 1
        path.append((i, j))
    path.reverse()
    return path


def score_aligned(a, b, pairs, diagonal) -> MultiMatchScore:
    shape = length = direction = position = duration = 0.0
    for i, j in pairs:
        u, v = a[i], b[j]
        shape += math.hypot(u.dx - v.dx, u.dy - v.dy) / (2.0 * diagonal)
        length += abs(u.amplitude - v.amplitude) / diagonal
        direction += _angle_between(u.dx, u.dy, v.dx, v.dy) / math.pi
        position += math.hypot(u.start_x - v.start_x, u.start_y - v.start_y) / diagonal
        longest = max(u.duration, v.duration)
        if longest > 0:
            duration += abs(u.duration - v.duration) / longest
    n = len(pairs)

    def sim(total):
        return min(1.0, max(0.0, 1.0 - total / n))

    return MultiMatchScore(sim(shape), sim(length), sim(direction), sim(position), sim(duration))


def compare(a, b, cfg: MultiMatchConfig) -> MultiMatchScore:
    va, vb = to_vectors(a), to_vectors(b)
    if cfg.simplification_enabled:
        va, vb = simplify(va, cfg), simplify(vb, cfg)
    return score_aligned(va, vb, align(va, vb), cfg.screen_diagonal)


def pair_paths(paths, strategy="cross"):
    """Pairs of paths on the same image.

    ``cross``: every free-viewing path against every visual-search path.
    ``all``: every unordered pair regardless of condition.
    """
    by_image: dict[str, list] = {}
    for sp in paths:
        by_image.setdefault(sp.image_id, []).append(sp)
    pairs = []
    for image_id, group in by_image.items():
        if strategy == "cross":
            fv = [p for p in group if p.condition.value == "fv"]
            vs = [p for p in group if p.condition.value == "vs"]
            pairs.extend((p, q) for p in fv for q in vs)
        elif strategy == "all":
            pairs.extend(
                (group[i], group[j]) for i in range(len(group)) for j in range(i + 1, len(group))
            )
        else:
            raise ValueError(f"unknown pairing strategy {strategy!r}")
    return pairs
