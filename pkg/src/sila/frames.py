"""Intersection frames and the common-frame normalization of trajectories.

Raw trajectories live in per-intersection metric coordinates.  The common
frame has its origin at the intersection corner, axes along the two
curbsides, and is scaled by the sidewalk width, so primitives learned at
one intersection transfer to others.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError, ModelFileError

DET_EPS = 1e-6


@dataclass(frozen=True)
class IntersectionFrame:
    origin: np.ndarray
    axis1: np.ndarray
    axis2: np.ndarray
    sidewalk_width: float

    def __post_init__(self):
        for name in ("origin", "axis1", "axis2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if abs(np.linalg.norm(self.axis1) - 1.0) > 1e-9:
            raise DataError("axis1 must be unit length")
        if abs(np.linalg.norm(self.axis2) - 1.0) > 1e-9:
            raise DataError("axis2 must be unit length")
        if abs(np.linalg.det(self.basis)) <= DET_EPS:
            raise DataError("frame axes are (near) parallel")
        if not self.sidewalk_width > 0:
            raise DataError("sidewalk_width must be positive")

    @property
    def basis(self) -> np.ndarray:
        return np.column_stack([self.axis1, self.axis2])


@dataclass(frozen=True)
class RawTrajectory:
    id: str
    samples: np.ndarray  # (n, 3): t, x, y
    frame_id: str = ""

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", s)
        _check_samples(s)


@dataclass(frozen=True)
class NormalizedTrajectory:
    id: str
    samples: np.ndarray  # (n, 3): t, a, b

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", s)
        _check_samples(s)

    @property
    def points(self) -> np.ndarray:
        return self.samples[:, 1:3]

    @property
    def times(self) -> np.ndarray:
        return self.samples[:, 0]


def _check_samples(s):
    if s.ndim != 2 or s.shape[1] != 3:
        raise DataError("samples must be an (n, 3) array")
    if s.shape[0] < 2:
        raise DataError("trajectory needs at least 2 samples")
    if not np.all(np.diff(s[:, 0]) > 0):
        raise DataError("timestamps must be strictly increasing")
    if not np.all(np.isfinite(s)):
        raise DataError("non-finite sample values")


def to_common_frame(traj: RawTrajectory, frame: IntersectionFrame) -> NormalizedTrajectory:
    """Contravariant coordinates in the curbside basis, scaled by sidewalk width."""
    pts = traj.samples[:, 1:3] - frame.origin
    ab = np.linalg.solve(frame.basis, pts.T).T / frame.sidewalk_width
    return NormalizedTrajectory(traj.id, np.column_stack([traj.samples[:, 0], ab]))


def from_common_frame(traj: NormalizedTrajectory, frame: IntersectionFrame) -> RawTrajectory:
    pts = (frame.basis @ (traj.points * frame.sidewalk_width).T).T + frame.origin
    return RawTrajectory(traj.id, np.column_stack([traj.times, pts]))


def resample(traj: NormalizedTrajectory, dt: float) -> NormalizedTrajectory:
    """Piecewise-linear resampling at uniform dt; both endpoints kept."""
    if dt <= 0:
        raise DataError("dt must be positive")
    t = traj.times
    duration = t[-1] - t[0]
    if duration < dt:
        raise DataError("trajectory shorter than one dt")
    n_steps = int(np.floor(duration / dt + 1e-9))
    tq = t[0] + dt * np.arange(n_steps + 1)
    if t[-1] - tq[-1] > 1e-9:
        tq = np.append(tq, t[-1])
    a = np.interp(tq, t, traj.samples[:, 1])
    b = np.interp(tq, t, traj.samples[:, 2])
    return NormalizedTrajectory(traj.id, np.column_stack([tq, a, b]))


# ---------------------------------------------------------------------------
# file formats


def load_frame(path) -> IntersectionFrame:
    try:
        with open(path) as fh:
            d = json.load(fh)
        return IntersectionFrame(d["origin"], d["axis1"], d["axis2"], float(d["sidewalk_width"]))
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise ModelFileError(f"bad frame file {path}: {e}") from e


def save_frame(frame: IntersectionFrame, path):
    from .store import atomic_write

    d = {
        "origin": list(frame.origin),
        "axis1": list(frame.axis1),
        "axis2": list(frame.axis2),
        "sidewalk_width": frame.sidewalk_width,
    }
    atomic_write(path, json.dumps(d, sort_keys=True) + "\n")


def load_trajectories(path) -> list[RawTrajectory]:
    """CSV with header traj_id,t,x,y, rows grouped by traj_id."""
    groups: dict[str, list] = {}
    order: list[str] = []
    try:
        fh = open(path, newline="")
    except OSError as e:
        raise ModelFileError(f"cannot read {path}: {e}") from e
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["traj_id", "t", "x", "y"]:
            raise ModelFileError(f"{path}: expected header traj_id,t,x,y")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ModelFileError(f"{path}:{lineno}: expected 4 fields")
            tid = row[0]
            try:
                rec = [float(row[1]), float(row[2]), float(row[3])]
            except ValueError as e:
                raise ModelFileError(f"{path}:{lineno}: {e}") from e
            if tid not in groups:
                groups[tid] = []
                order.append(tid)
            groups[tid].append(rec)
    out = []
    for tid in order:
        try:
            out.append(RawTrajectory(tid, np.array(groups[tid])))
        except DataError as e:
            raise ModelFileError(f"{path}: trajectory {tid}: {e}") from e
    return out


def save_trajectories(trajs, path):
    from .store import atomic_write

    lines = ["traj_id,t,x,y"]
    for tr in trajs:
        for t, x, y in tr.samples:
            lines.append(f"{tr.id},{float(t)!r},{float(x)!r},{float(y)!r}")
    atomic_write(path, "\n".join(lines) + "\n")
