"""Grid-world discretization: per-cell unit velocity fields and their algebra.

A trajectory becomes a sparse map cell -> unit velocity; motion primitives
live in the same ambient space R^(2N) with zeros off-support.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .frames import NormalizedTrajectory

OUT_OF_BOUNDS = -1

DEFAULT_ROWS = 25
DEFAULT_COLS = 29


@dataclass(frozen=True, eq=False)
class GridSpec:
    rows: int
    cols: int
    min_corner: np.ndarray
    cell_size: float

    def __eq__(self, other):
        if not isinstance(other, GridSpec):
            return NotImplemented
        return (self.rows == other.rows and self.cols == other.cols
                and self.cell_size == other.cell_size
                and np.array_equal(self.min_corner, other.min_corner))

    def __post_init__(self):
        object.__setattr__(self, "min_corner", np.asarray(self.min_corner, dtype=float))
        if self.rows < 1 or self.cols < 1:
            raise DataError("grid must have at least one row and column")
        if not self.cell_size > 0:
            raise DataError("cell_size must be positive")

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols

    def cell_index(self, p) -> int:
        """Row-major index of the cell containing p, or OUT_OF_BOUNDS."""
        col = int(np.floor((p[0] - self.min_corner[0]) / self.cell_size))
        row = int(np.floor((p[1] - self.min_corner[1]) / self.cell_size))
        if 0 <= row < self.rows and 0 <= col < self.cols:
            return row * self.cols + col
        return OUT_OF_BOUNDS

    def cell_indices(self, pts: np.ndarray) -> np.ndarray:
        rc = np.floor((pts - self.min_corner) / self.cell_size).astype(int)
        cols, rows = rc[:, 0], rc[:, 1]
        ok = (rows >= 0) & (rows < self.rows) & (cols >= 0) & (cols < self.cols)
        idx = np.where(ok, rows * self.cols + cols, OUT_OF_BOUNDS)
        return idx


def grid_from_points(points: np.ndarray, rows: int = DEFAULT_ROWS, cols: int = DEFAULT_COLS,
                     margin: float = 0.05) -> GridSpec:
    """Grid covering the bounding box of `points` plus a relative margin."""
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = hi - lo
    pad = margin * np.where(span > 0, span, 1.0)
    lo = lo - pad
    hi = hi + pad
    cell = max((hi[0] - lo[0]) / cols, (hi[1] - lo[1]) / rows)
    return GridSpec(rows, cols, lo, cell)


@dataclass
class GridVector:
    """Sparse per-cell 2D velocity field; stored velocities are unit length."""

    n_cells: int
    cells: dict[int, np.ndarray] = field(default_factory=dict)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(2 * self.n_cells)
        for k, v in self.cells.items():
            out[2 * k : 2 * k + 2] = v
        return out


@dataclass
class MotionPrimitive:
    """Dictionary atom: sparse cell-wise velocity field (not necessarily unit
    after fusion)."""

    id: int
    cells: dict[int, np.ndarray]

    def norm(self) -> float:
        return float(np.sqrt(sum(float(v @ v) for v in self.cells.values())))

    def to_dense(self, n_cells: int) -> np.ndarray:
        out = np.zeros(2 * n_cells)
        for k, v in self.cells.items():
            out[2 * k : 2 * k + 2] = v
        return out


def with_velocities(traj: NormalizedTrajectory) -> np.ndarray:
    """(n, 5) array [t, a, b, va, vb] via forward finite differences.

    The last sample reuses the previous velocity so every sample carries one.
    Assumes the trajectory was resampled at (near) uniform dt.
    """
    s = traj.samples
    dt = np.diff(s[:, 0])[:, None]
    v = np.diff(s[:, 1:3], axis=0) / dt
    v = np.vstack([v, v[-1]])
    return np.column_stack([s, v])


def vectorize(traj: NormalizedTrajectory, grid: GridSpec,
              drop_speed: float = 1e-6) -> GridVector:
    """Average per-cell finite-difference velocities, then normalize to unit."""
    sv = with_velocities(traj)
    idx = grid.cell_indices(sv[:, 1:3])
    inb = idx != OUT_OF_BOUNDS
    if not inb.any():
        raise DataError("trajectory entirely outside the grid")
    if inb.sum() < 2:
        raise DataError("fewer than 2 in-bounds samples")
    # forward-difference velocity belongs to its starting sample; the final
    # duplicated velocity is skipped
    cells: dict[int, list] = {}
    for i in range(sv.shape[0] - 1):
        if inb[i]:
            cells.setdefault(int(idx[i]), []).append(sv[i, 3:5])
    out: dict[int, np.ndarray] = {}
    for k, vs in cells.items():
        m = np.mean(vs, axis=0)
        speed = np.linalg.norm(m)
        if speed >= drop_speed:
            out[k] = m / speed
    return GridVector(grid.n_cells, out)


def inner_product(a: GridVector | MotionPrimitive, b: GridVector | MotionPrimitive) -> float:
    """Dot product in the ambient R^(2N); absent cells contribute zero."""
    na = getattr(a, "n_cells", None)
    nb = getattr(b, "n_cells", None)
    if na is not None and nb is not None and na != nb:
        raise DataError("grid dimension mismatch")
    ca, cb = a.cells, b.cells
    if len(cb) < len(ca):
        ca, cb = cb, ca
    return float(sum(v @ cb[k] for k, v in ca.items() if k in cb))
