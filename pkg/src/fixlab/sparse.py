"""Sparse coding and dictionary learning.

Solves ``min_{D,C} ||X - C D||_F^2 + lambda1 * ||C||_1`` subject to every
dictionary row having squared norm <= 1.  Codes come from cyclic
coordinate descent with soft-thresholding; the dictionary is updated one
row at a time by least squares, then projected onto the unit ball (which
is the exact constrained row minimiser, so the objective never rises).
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import binio
from .errors import DegenerateInputError, DimensionError, ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SparseCodingConfig:
    lambda1: float = 0.15
    max_outer_iters: int = 20
    encode_tolerance: float = 1e-6
    seed: int = 0
    max_sweeps: int = 1000

    def __post_init__(self):
        if self.lambda1 < 0:
            raise ValueError("lambda1 must be >= 0")
        if not self.encode_tolerance > 0:
            raise ValueError("encode_tolerance must be > 0")


@dataclass(frozen=True)
class Dictionary:
    atoms: np.ndarray                     # (l, d), row j is codeword j
    lambda1: float = 0.0
    seed: int = 0
    iterations: int = 0
    objectives: tuple = field(default=(), compare=False)

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim != 2:
            raise DimensionError("dictionary atoms must be a 2-D array")
        sq = (atoms ** 2).sum(axis=1)
        if np.any(sq > 1 + 1e-9):
            worst = int(np.argmax(sq))
            raise ValidationError(
                f"dictionary row {worst} has squared norm {sq[worst]:.6g} > 1"
            )
        object.__setattr__(self, "atoms", atoms)

    @property
    def size(self):
        return self.atoms.shape[0]

    @property
    def dim(self):
        return self.atoms.shape[1]


def project_rows(atoms):
    """Scale every row with norm > 1 back onto the unit sphere."""
    atoms = np.array(atoms, dtype=float)
    norms = np.linalg.norm(atoms, axis=1)
    over = norms > 1.0
    atoms[over] /= norms[over, None]
    return atoms


def objective(X, C, atoms, lambda1):
    resid = np.asarray(X) - np.asarray(C) @ np.asarray(atoms)
    return float((resid ** 2).sum() + lambda1 * np.abs(C).sum())


def _soft(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def encode_batch(X, D: Dictionary, cfg: SparseCodingConfig, init=None) -> np.ndarray:
    """Codes (n, l) for every row of ``X``; each row is solved independently.

    Samples leave the sweep loop once their largest coordinate change in a
    sweep drops below ``encode_tolerance``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    atoms = D.atoms
    if X.shape[1] != atoms.shape[1]:
        raise DimensionError(
            f"descriptor dimension {X.shape[1]} != dictionary dimension {atoms.shape[1]}"
        )
    n, l = X.shape[0], atoms.shape[0]
    gram = atoms @ atoms.T
    diag = np.diag(gram).copy()
    B = X @ atoms.T
    C = np.zeros((n, l)) if init is None else np.array(init, dtype=float)
    half = cfg.lambda1 / 2.0
    active = np.arange(n)
    # (l, n_active) layout keeps each coordinate's row contiguous
    Ct, Bt = C.T.copy(), B.T.copy()
    for _ in range(cfg.max_sweeps):
        if active.size == 0:
            break
        Ca, Ba = Ct[:, active], Bt[:, active]
        delta = np.zeros(active.size)
        for j in range(l):
            if diag[j] <= 0:
                new = np.zeros(active.size)
            else:
                z = Ba[j] - gram[j] @ Ca + diag[j] * Ca[j]
                new = _soft(z, half) / diag[j]
            np.maximum(delta, np.abs(new - Ca[j]), out=delta)
            Ca[j] = new
        Ct[:, active] = Ca
        active = active[delta >= cfg.encode_tolerance]
    return Ct.T.copy()


def encode(x, D: Dictionary, cfg: SparseCodingConfig) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionError("encode expects a single descriptor vector")
    return encode_batch(x[None, :], D, cfg)[0]


def _initial_atoms(X, l, rng):
    nonzero = np.flatnonzero(np.abs(X).sum(axis=1) > 0)
    pool = nonzero if nonzero.size >= l else np.arange(X.shape[0])
    idx = rng.choice(pool, size=l, replace=False)
    return project_rows(X[np.sort(idx)])


def learn_dictionary(X, l: int, cfg: SparseCodingConfig, init=None):
    """Alternate coding and row-wise dictionary updates.

    Returns ``(dictionary, codes)``; ``dictionary.objectives`` holds the
    objective at initialisation and after every alternation.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError("training descriptors must be a 2-D array")
    n, d = X.shape
    if n < l:
        raise ValidationError(f"need at least l={l} samples, got {n}")
    if not np.any(X):
        raise DegenerateInputError("all training descriptors are zero")
    if l <= d:
        log.warning("dictionary with l=%d <= d=%d is not overcomplete", l, d)

    rng = np.random.default_rng(cfg.seed)
    atoms = project_rows(init) if init is not None else _initial_atoms(X, l, rng)
    C = np.zeros((n, l))
    history = [objective(X, C, atoms, cfg.lambda1)]
    iterations = 0
    for _ in range(cfg.max_outer_iters):
        C = encode_batch(X, Dictionary(atoms), cfg, init=C)
        resid = X - C @ atoms
        for j in range(l):
            c = C[:, j]
            energy = c @ c
            if energy == 0:
                continue
            resid += np.outer(c, atoms[j])
            row = (c @ resid) / energy
            norm = np.linalg.norm(row)
            if norm > 1.0:
                row /= norm
            atoms[j] = row
            resid -= np.outer(c, row)
        iterations += 1
        history.append(objective(X, C, atoms, cfg.lambda1))
        prev, cur = history[-2], history[-1]
        if prev > 0 and (prev - cur) / prev < cfg.encode_tolerance:
            break
    D = Dictionary(atoms, cfg.lambda1, cfg.seed, iterations, tuple(history))
    return D, C


def sample_training_pool(descriptor_sets, max_samples, seed):
    """Seeded subsample of at most ``max_samples`` descriptor rows."""
    X = np.vstack([s.vectors for s in descriptor_sets])
    if X.shape[0] <= max_samples:
        return X
    rng = np.random.default_rng(seed)
    return X[np.sort(rng.choice(X.shape[0], size=max_samples, replace=False))]


def save_dictionary(D: Dictionary, path, sidecar_path=None):
    binio.write_bytes_atomic(path, binio.encode_dictionary(D.atoms))
    meta = {
        "l": D.size,
        "d": D.dim,
        "lambda1": D.lambda1,
        "seed": D.seed,
        "iterations": D.iterations,
        "objectives": list(D.objectives),
    }
    sidecar_path = sidecar_path or f"{path}.json"
    binio.write_text_atomic(sidecar_path, json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_dictionary(path, sidecar_path=None) -> Dictionary:
    atoms = binio.read_dictionary_atoms(path)
    # f32 storage can push a unit row a hair over 1
    atoms = project_rows(atoms)
    meta = {}
    try:
        with open(sidecar_path or f"{path}.json", encoding="utf-8") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        pass
    return Dictionary(
        atoms,
        meta.get("lambda1", 0.0),
        meta.get("seed", 0),
        meta.get("iterations", 0),
        tuple(meta.get("objectives", ())),
    )
