"""Semi-non-negative sparse coding of trajectory grid vectors.

Alternating minimization of ||Y - D C||_F^2 + lambda * sum(C) with C >= 0
and D free in sign.  The D step is an exact least-squares solve (min-norm
when C C^T is singular), the C step is cyclic nonnegative coordinate
descent, so the objective never increases across an outer iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .grid import GridVector, MotionPrimitive
from .kernels import nn_coordinate_descent

log = logging.getLogger(__name__)

CELL_EPS = 1e-8  # atom cells with smaller magnitude are treated as empty
USAGE_EPS = 1e-8  # coefficient magnitude counting as "uses this atom"


@dataclass
class SparseCodingConfig:
    L_max: int = 40
    lam: float | None = None  # None: 0.1 * mean(||y||^2)
    max_iters: int = 100
    tol: float = 1e-5
    prune_threshold: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.L_max < 1:
            raise DataError("L_max must be >= 1")
        if not self.tol > 0:
            raise DataError("tol must be positive")


@dataclass
class Dictionary:
    atoms: list[MotionPrimitive]

    @property
    def L(self) -> int:
        return len(self.atoms)

    def atom(self, atom_id: int) -> MotionPrimitive:
        a = self.atoms[atom_id - 1]
        assert a.id == atom_id
        return a

    def to_matrix(self, n_cells: int) -> np.ndarray:
        return np.column_stack([a.to_dense(n_cells) for a in self.atoms])


@dataclass
class Coefficients:
    C: np.ndarray  # (L, p), nonnegative


def objective(Y: np.ndarray, D: np.ndarray, C: np.ndarray, lam: float) -> float:
    if Y.shape != (D.shape[0], C.shape[1]) or D.shape[1] != C.shape[0]:
        raise DataError("objective: inconsistent shapes")
    r = Y - D @ C
    return float((r * r).sum() + lam * np.abs(C).sum())


def _code_columns(D, Y, lam, C=None, sweeps=30, tol=1e-8):
    G = D.T @ D
    B = D.T @ Y
    L, p = D.shape[1], Y.shape[1]
    if C is None:
        C = np.zeros((L, p))
    for i in range(p):
        C[:, i] = nn_coordinate_descent(G, np.ascontiguousarray(B[:, i]), lam,
                                        np.ascontiguousarray(C[:, i]), sweeps, tol)
    return C


def learn_dictionary(vectors: list[GridVector], cfg: SparseCodingConfig,
                     trace: list | None = None):
    """Learn motion primitives; returns (Dictionary, Coefficients).

    When `trace` is a list, the objective value after each outer iteration
    is appended to it (monitoring/testing hook).
    """
    if not vectors:
        raise DataError("no training vectors")
    n_cells = vectors[0].n_cells
    Y = np.column_stack([v.to_dense() for v in vectors])
    if not np.any(Y):
        raise DataError("all training vectors are zero")
    p = Y.shape[1]
    lam = cfg.lam if cfg.lam is not None else 0.1 * float((Y * Y).sum(axis=0).mean())

    rng = np.random.default_rng(cfg.seed)
    L = min(cfg.L_max, p)
    init_cols = rng.choice(p, size=L, replace=False)
    D = Y[:, np.sort(init_cols)].copy()

    C = np.zeros((L, p))
    prev_obj = np.inf
    for it in range(cfg.max_iters):
        C = _code_columns(D, Y, lam, C)
        # exact LS dictionary update: D^T = argmin over (C C^T) D^T = C Y^T
        D = np.linalg.lstsq(C @ C.T, C @ Y.T, rcond=None)[0].T
        obj = objective(Y, D, C, lam)
        if trace is not None:
            trace.append(obj)
        if obj > prev_obj + 1e-9:
            log.warning("sparse coding objective increased at iter %d", it)
        if prev_obj - obj < cfg.tol * max(prev_obj, 1.0):
            prev_obj = obj
            break
        prev_obj = obj

    # prune rarely used / empty atoms, then refit the codes once
    usage = (C > USAGE_EPS).sum(axis=1)
    col_norm = np.linalg.norm(D, axis=0)
    keep = (usage >= min(cfg.prune_threshold, p)) & (col_norm > CELL_EPS)
    if not keep.any():
        keep = col_norm > CELL_EPS
    if not keep.any():
        raise DataError("sparse coding produced no usable atoms")
    D = D[:, keep]
    C = _code_columns(D, Y, lam)

    atoms = []
    for a in range(D.shape[1]):
        col = D[:, a]
        cells = {}
        for k in range(n_cells):
            v = col[2 * k : 2 * k + 2]
            if np.linalg.norm(v) > CELL_EPS:
                cells[k] = v.copy()
        atoms.append(MotionPrimitive(len(atoms) + 1, cells))
    return Dictionary(atoms), Coefficients(C)


def sparse_code(y: GridVector, dictionary: Dictionary, lam: float,
                sweeps: int = 100, tol: float = 1e-10) -> np.ndarray:
    """Nonnegative coefficients of y against the dictionary (length L)."""
    if dictionary.L == 0:
        raise DataError("empty dictionary")
    D = dictionary.to_matrix(y.n_cells)
    yd = y.to_dense()
    G = D.T @ D
    b = D.T @ yd
    c = np.zeros(dictionary.L)
    return nn_coordinate_descent(G, b, lam, c, sweeps, tol)
