"""Trajectory segmentation against a dictionary and the transition graph."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .grid import OUT_OF_BOUNDS, GridSpec, with_velocities
from .sparse_coding import Dictionary

log = logging.getLogger(__name__)

MIN_RUN_CELLS = 2


@dataclass
class Segment:
    traj_id: str
    atom_id: int
    cell_run: list[int]
    samples: np.ndarray  # (k, 5): t, x, y, vx, vy


@dataclass
class EdgeData:
    count: int
    samples: np.ndarray | None = None  # raw (x, y, vx, vy) training rows
    flow: object | None = None  # FlowField, attached by model training


@dataclass
class MotionPrimitiveGraph:
    nodes: list[int]
    edges: dict[tuple[int, int], EdgeData] = field(default_factory=dict)


def _cell_scores(cell: int, dictionary: Dictionary, code: np.ndarray) -> np.ndarray:
    s = np.zeros(dictionary.L)
    for a, atom in enumerate(dictionary.atoms):
        v = atom.cells.get(cell)
        if v is not None:
            s[a] = code[a] * np.linalg.norm(v)
    return s


def segment_trajectory(traj, grid: GridSpec, dictionary: Dictionary,
                       code: np.ndarray) -> list[Segment]:
    """Split one normalized trajectory into per-primitive segments.

    Each visited cell goes to the atom maximising coefficient * atom cell
    magnitude (ties to the lower id); runs shorter than MIN_RUN_CELLS are
    absorbed into the longer neighbour.  Returns [] when no atom explains
    any cell (trajectory skipped).
    """
    sv = with_velocities(traj)
    idx = grid.cell_indices(sv[:, 1:3])
    # traversal entries: (cell, sample rows), consecutive same-cell merged
    entries: list[tuple[int, list[int]]] = []
    for i, k in enumerate(idx):
        if k == OUT_OF_BOUNDS:
            continue
        if entries and entries[-1][0] == k:
            entries[-1][1].append(i)
        else:
            entries.append((int(k), [i]))
    if not entries:
        return []

    assigned = []
    for cell, _ in entries:
        s = _cell_scores(cell, dictionary, code)
        assigned.append(int(np.argmax(s)) + 1 if s.max() > 0 else 0)
    if not any(assigned):
        log.warning("trajectory %s: no atom explains any visited cell", traj.id)
        return []
    # unexplained cells inherit from the nearest assigned neighbour
    last = 0
    for i, a in enumerate(assigned):
        if a:
            last = a
        elif last:
            assigned[i] = last
    for i in range(len(assigned) - 1, -1, -1):
        if assigned[i]:
            last = assigned[i]
        else:
            assigned[i] = last

    runs: list[list[int]] = []  # entry indices per run
    for i, a in enumerate(assigned):
        if runs and assigned[runs[-1][0]] == a:
            runs[-1].append(i)
        else:
            runs.append([i])
    # absorb short runs into the longer neighbour, repeat until stable
    changed = True
    while changed and len(runs) > 1:
        changed = False
        for r, run in enumerate(runs):
            if len(run) >= MIN_RUN_CELLS:
                continue
            left = runs[r - 1] if r > 0 else None
            right = runs[r + 1] if r + 1 < len(runs) else None
            target = left if right is None or (left is not None and len(left) >= len(right)) else right
            if target is None:
                continue
            tgt_atom = assigned[target[0]]
            for i in run:
                assigned[i] = tgt_atom
            changed = True
            break
        if changed:
            runs = []
            for i, a in enumerate(assigned):
                if runs and assigned[runs[-1][0]] == a:
                    runs[-1].append(i)
                else:
                    runs.append([i])

    segments = []
    for run in runs:
        rows = [j for i in run for j in entries[i][1]]
        segments.append(Segment(traj.id, assigned[run[0]],
                                [entries[i][0] for i in run], sv[rows]))
    return segments


def build_transition_matrix(segments_by_traj: list[list[Segment]], L: int) -> np.ndarray:
    """Counts T[i-1, j-1] of observed transitions; single-segment
    trajectories count as a self-transition (so self edges get a GP)."""
    T = np.zeros((L, L), dtype=int)
    for segs in segments_by_traj:
        if not segs:
            continue
        if len(segs) == 1:
            a = segs[0].atom_id
            T[a - 1, a - 1] += 1
        else:
            for s1, s2 in zip(segs, segs[1:]):
                T[s1.atom_id - 1, s2.atom_id - 1] += 1
    return T


def build_graph(T: np.ndarray, segments_by_traj: list[list[Segment]]) -> MotionPrimitiveGraph:
    """Edges where T > 0; per edge, training data is the concatenation of the
    adjoining segments' (x, y, vx, vy) samples."""
    L = T.shape[0]
    buckets: dict[tuple[int, int], list[np.ndarray]] = {}
    for segs in segments_by_traj:
        if not segs:
            continue
        if len(segs) == 1:
            a = segs[0].atom_id
            buckets.setdefault((a, a), []).append(segs[0].samples[:, 1:5])
        else:
            for s1, s2 in zip(segs, segs[1:]):
                key = (s1.atom_id, s2.atom_id)
                buckets.setdefault(key, []).append(
                    np.vstack([s1.samples[:, 1:5], s2.samples[:, 1:5]]))
    edges = {}
    for i in range(L):
        for j in range(L):
            if T[i, j] > 0:
                key = (i + 1, j + 1)
                if key not in buckets:
                    raise DataError(f"transition {key} counted but has no samples")
                edges[key] = EdgeData(int(T[i, j]), np.vstack(buckets[key]))
    return MotionPrimitiveGraph(list(range(1, L + 1)), edges)
