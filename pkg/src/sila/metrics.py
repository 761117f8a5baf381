"""Evaluation metrics: modified Hausdorff distance, weighted error, sizes."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .kernels import mhd_points
from .predictor import PredictionSet


@dataclass
class EvalReport:
    weighted_mhd_mean: float
    per_trajectory: list[tuple[str, float]]
    model_primitives: int
    model_transitions: int
    learn_time_s: float = 0.0
    skipped: int = 0


def mhd(a, b) -> float:
    """Modified Hausdorff distance between two 2D point sets."""
    a = np.ascontiguousarray(np.atleast_2d(np.asarray(a, dtype=float)))
    b = np.ascontiguousarray(np.atleast_2d(np.asarray(b, dtype=float)))
    if a.size == 0 or b.size == 0:
        raise DataError("mhd of an empty point set")
    return float(mhd_points(a, b))


def weighted_mhd(preds: PredictionSet, truth) -> float:
    """Likelihood-weighted mean of per-hypothesis MHD against the truth."""
    if not preds.hypotheses:
        raise DataError("weighted_mhd of an empty prediction set")
    return float(sum(h.weight * mhd(h.path, truth) for h in preds.hypotheses))


def model_size(model) -> tuple[int, int, int]:
    p, t = model.n_primitives, model.n_transitions
    return p, t, p + t


def timed(fn, *args, **kwargs):
    """(result, wall-clock seconds) using a monotonic clock."""
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0
