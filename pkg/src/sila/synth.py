"""Seeded synthetic intersections and pedestrian trajectories.

Substitutes for real intersection recordings: four behaviour families
(two straight walks along the legs, a corner turn, a road crossing) on
templates with right / open / closed corner angles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .frames import IntersectionFrame, RawTrajectory

SAMPLE_HZ = 2.5  # 3.2 s observation = 8 points
TEMPLATE_ANGLES = {"right": 90.0, "open": 120.0, "closed": 60.0}
BEHAVIORS = ("straight1", "straight2", "corner", "cross")


@dataclass(frozen=True)
class IntersectionTemplate:
    corner_angle: float
    sidewalk_width: float
    crosswalk: bool
    name: str

    def __post_init__(self):
        if not 45.0 <= self.corner_angle <= 135.0:
            raise DataError("corner angle outside [45, 135] degrees")
        if not self.sidewalk_width > 0:
            raise DataError("sidewalk width must be positive")


@dataclass
class ScenarioConfig:
    n_trajectories: int = 200
    noise_std: float = 0.1
    speed_range: tuple[float, float] = (0.8, 1.6)
    behavior_mix: dict = field(default_factory=lambda: {
        "straight1": 0.3, "straight2": 0.3, "corner": 0.25, "cross": 0.15})
    truncate_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        w = sum(self.behavior_mix.values())
        if abs(w - 1.0) > 1e-9:
            raise DataError("behavior mix weights must sum to 1")
        if self.speed_range[0] <= 0:
            raise DataError("speeds must be positive")


def make_template(kind: str, seed: int = 0) -> tuple[IntersectionTemplate, IntersectionFrame]:
    """Deterministic template: right=90, open=120, closed=60 degrees."""
    if kind not in TEMPLATE_ANGLES:
        raise DataError(f"unknown template kind {kind!r}")
    rng = np.random.default_rng(seed)
    width = float(rng.uniform(2.0, 4.0))
    angle = TEMPLATE_ANGLES[kind]
    tpl = IntersectionTemplate(angle, width, crosswalk=True, name=f"{kind}-{seed}")
    rad = np.deg2rad(angle)
    frame = IntersectionFrame(np.zeros(2), np.array([1.0, 0.0]),
                              np.array([np.cos(rad), np.sin(rad)]), width)
    return tpl, frame


def _interior_normals(frame: IntersectionFrame):
    u1, u2 = frame.axis1, frame.axis2
    n1 = u2 - (u2 @ u1) * u1
    n1 /= np.linalg.norm(n1)
    n2 = u1 - (u1 @ u2) * u2
    n2 /= np.linalg.norm(n2)
    return n1, n2


def _bezier(p0, p1, p2, n=12):
    t = np.linspace(0.0, 1.0, n)[:, None]
    return (1 - t) ** 2 * p0 + 2 * t * (1 - t) * p1 + t**2 * p2


def _nominal_path(behavior: str, frame: IntersectionFrame) -> np.ndarray:
    """Dense waypoint polyline (meters, raw frame) for one behaviour."""
    u1, u2 = frame.axis1, frame.axis2
    n1, n2 = _interior_normals(frame)
    off1 = 0.5 * frame.sidewalk_width * n1
    off2 = 0.5 * frame.sidewalk_width * n2
    if behavior == "straight1":
        return np.array([12.0 * u1 + off1, -3.0 * u1 + off1])
    if behavior == "straight2":
        return np.array([-3.0 * u2 + off2, 12.0 * u2 + off2])
    if behavior == "corner":
        # centerline intersection point c: c = a*u1 + off1 = b*u2 + off2
        A = np.column_stack([u1, -u2])
        ab = np.linalg.solve(A, off2 - off1)
        c = ab[0] * u1 + off1
        lead_in = c + 2.0 * u1
        lead_out = c + 2.0 * u2
        arc = _bezier(lead_in, c, lead_out)
        return np.vstack([12.0 * u1 + off1, arc, 12.0 * u2 + off2])
    if behavior == "cross":
        start = 6.0 * u1 + off1
        return np.array([start, start + 8.0 * n1])
    raise DataError(f"unknown behavior {behavior!r}")


def _arclength_samples(poly: np.ndarray, speed: float):
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    step = speed / SAMPLE_HZ
    sq = np.arange(0.0, total + 1e-9, step)
    x = np.interp(sq, s, poly[:, 0])
    y = np.interp(sq, s, poly[:, 1])
    return np.column_stack([x, y])


def generate_trajectories(tpl: IntersectionTemplate, frame: IntersectionFrame,
                          cfg: ScenarioConfig) -> list[RawTrajectory]:
    """Seeded generation; each trajectory uses its own derived RNG stream."""
    names = sorted(cfg.behavior_mix)
    probs = np.array([cfg.behavior_mix[b] for b in names])
    out = []
    for i in range(cfg.n_trajectories):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, i]))
        behavior = names[rng.choice(len(names), p=probs)]
        speed = rng.uniform(*cfg.speed_range)
        pts = _arclength_samples(_nominal_path(behavior, frame), speed)
        if rng.uniform() < cfg.truncate_prob and pts.shape[0] > 5:
            cut = int(rng.uniform(0, 0.4) * pts.shape[0])
            if cut:
                pts = pts[cut:] if rng.uniform() < 0.5 else pts[:-cut]
        pts = pts + rng.normal(scale=cfg.noise_std, size=pts.shape)
        t = np.arange(pts.shape[0]) / SAMPLE_HZ
        out.append(RawTrajectory(f"{tpl.name}-{behavior}-{i:04d}",
                                 np.column_stack([t, pts]), frame_id=tpl.name))
    return out


def split_episodes(dataset: list, batch_size: int, trial_seed: int,
                   test_frac: float = 0.15, split_seed: int = 12345):
    """Hold out a fixed test fraction, then shuffle and chunk the rest.

    The test split depends only on split_seed, so different trials see the
    same test set but different batch orders.
    """
    if batch_size < 1:
        raise DataError("batch_size must be >= 1")
    n = len(dataset)
    if n < batch_size:
        raise DataError("dataset smaller than one batch")
    rng = np.random.default_rng(split_seed)
    n_test = int(round(test_frac * n))
    test_idx = set(rng.choice(n, size=n_test, replace=False).tolist())
    test = [dataset[i] for i in sorted(test_idx)]
    train = [dataset[i] for i in range(n) if i not in test_idx]
    order = np.random.default_rng(trial_seed).permutation(len(train))
    shuffled = [train[i] for i in order]
    batches = [shuffled[i : i + batch_size] for i in range(0, len(shuffled), batch_size)]
    return test, batches
