"""Multi-hypothesis trajectory prediction over the motion primitive graph."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .frames import NormalizedTrajectory
from .gp import log_likelihood, predict_velocity
from .grid import OUT_OF_BOUNDS, GridVector, vectorize, with_velocities
from .model import Model
from .sparse_coding import sparse_code

log = logging.getLogger(__name__)

DEFAULT_OBS_WINDOW = 3.2
DEFAULT_HORIZON = 5.0
DEFAULT_DT = 0.4


@dataclass(frozen=True)
class Observation:
    samples: np.ndarray  # (n, 3): t, a, b in the common frame

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", s)
        if s.ndim != 2 or s.shape[1] != 3 or s.shape[0] < 2:
            raise DataError("observation needs >= 2 (t, a, b) samples")
        if not np.all(np.diff(s[:, 0]) > 0):
            raise DataError("observation timestamps must increase")


@dataclass
class Hypothesis:
    path: np.ndarray  # (k, 2) predicted points at uniform dt
    primitive_sequence: list[int]
    log_lik: float
    weight: float = 0.0


@dataclass
class PredictionSet:
    hypotheses: list[Hypothesis] = field(default_factory=list)


def classify_observation(obs: Observation, model: Model, lam: float = 0.0,
                         top: int | None = None) -> list[tuple[int, float]]:
    """Rank candidate current primitives for a partial trajectory.

    Score = coding coefficient times the (geometric-mean) likelihood of the
    observed position/velocity samples under the best GP of an edge leaving
    the atom.  Atoms with zero coefficient or no usable edge score zero.
    """
    traj = NormalizedTrajectory("obs", obs.samples)
    vec = vectorize(traj, model.grid)
    code = sparse_code(vec, model.dictionary, lam)
    sv = with_velocities(traj)
    data = sv[:, 1:5]
    scores = []
    for a, atom in enumerate(model.dictionary.atoms):
        c = code[a]
        if c <= 0:
            continue
        best = -np.inf
        for (i, j), e in model.graph.edges.items():
            if i == atom.id and e.flow is not None:
                best = max(best, log_likelihood(e.flow, data) / data.shape[0])
        if np.isfinite(best):
            scores.append((atom.id, float(c * np.exp(best))))
    scores.sort(key=lambda t: (-t[1], t[0]))
    return scores[:top] if top else scores


def enumerate_paths(graph, start_atom: int, max_depth: int) -> list[list[int]]:
    """All simple paths from start_atom with up to max_depth transitions.

    A self edge only contributes the length-1 path.  Deterministic order:
    depth-first with ascending successor ids.
    """
    if start_atom not in graph.nodes:
        raise DataError(f"start atom {start_atom} not in graph")
    succ: dict[int, list[int]] = {}
    for i, j in sorted(graph.edges):
        if i != j:
            succ.setdefault(i, []).append(j)
    out: list[list[int]] = []

    def dfs(path):
        out.append(list(path))
        if len(path) - 1 >= max_depth:
            return
        for j in succ.get(path[-1], []):
            if j not in path:
                path.append(j)
                dfs(path)
                path.pop()

    dfs([start_atom])
    return out


def _best_atom_at(model: Model, cell: int, candidates) -> int | None:
    best, best_mag = None, 0.0
    for a in candidates:
        v = model.dictionary.atom(a).cells.get(cell)
        if v is not None:
            mag = float(np.linalg.norm(v))
            if mag > best_mag:
                best, best_mag = a, mag
    return best


def rollout(model: Model, path: list[int], start_pos, dt: float,
            horizon: float) -> np.ndarray | None:
    """Forward-Euler integration of the path's GP flow fields.

    Returns floor(horizon/dt) points, or None when a needed edge has no
    trained flow field (hypothesis discarded).
    """
    if not path or dt <= 0:
        raise DataError("rollout needs a nonempty path and dt > 0")
    steps = int(np.floor(horizon / dt + 1e-9))
    if len(path) == 1:
        edge_seq = [(path[0], path[0])]
    else:
        edge_seq = list(zip(path, path[1:]))
    flows = []
    for key in edge_seq:
        e = model.graph.edges.get(key)
        if e is None or e.flow is None:
            log.debug("rollout: edge %s untrained, hypothesis discarded", key)
            return None
        flows.append(e.flow)

    p = np.asarray(start_pos, dtype=float).copy()
    seg = 0
    pts = np.empty((steps, 2))
    for s in range(steps):
        v, _ = predict_velocity(flows[seg], p)
        p = p + v * dt
        pts[s] = p
        if seg + 1 < len(flows):
            cell = model.grid.cell_index(p)
            if cell != OUT_OF_BOUNDS:
                cur, nxt = path[seg], path[seg + 1]
                vc = model.dictionary.atom(cur).cells.get(cell)
                vn = model.dictionary.atom(nxt).cells.get(cell)
                if vn is not None and (vc is None or
                                       np.linalg.norm(vn) >= np.linalg.norm(vc)):
                    seg += 1
    if not np.all(np.isfinite(pts)):
        return None
    return pts


def predict(obs: Observation, model: Model, horizon: float = DEFAULT_HORIZON,
            dt: float = DEFAULT_DT, max_depth: int = 3, top_k: int = 5,
            n_start_atoms: int = 2, lam: float = 0.0) -> PredictionSet:
    """Weighted multi-hypothesis prediction from a partial observation."""
    if model.n_primitives == 0:
        raise DataError("cannot predict with an empty model")
    try:
        candidates = classify_observation(obs, model, lam=lam, top=n_start_atoms)
    except DataError as e:
        log.warning("prediction failed: %s", e)
        return PredictionSet([])
    sv = with_velocities(NormalizedTrajectory("obs", obs.samples))
    obs_data = sv[:, 1:5]
    start = obs.samples[-1, 1:3]

    out_counts: dict[int, int] = {}
    for (i, _j), e in model.graph.edges.items():
        out_counts[i] = out_counts.get(i, 0) + e.count

    hyps: list[Hypothesis] = []
    for atom_id, _score in candidates:
        for path in enumerate_paths(model.graph, atom_id, max_depth):
            edge_seq = [(path[0], path[0])] if len(path) == 1 else list(zip(path, path[1:]))
            first = model.graph.edges.get(edge_seq[0])
            if first is None or first.flow is None:
                continue
            ll = log_likelihood(first.flow, obs_data)
            viable = True
            for key in edge_seq:
                e = model.graph.edges.get(key)
                if e is None:
                    viable = False
                    break
                ll += np.log(e.count / out_counts[key[0]])
            if not viable:
                continue
            pts = rollout(model, path, start, dt, horizon)
            if pts is None:
                continue
            hyps.append(Hypothesis(pts, path, float(ll)))

    if not hyps:
        log.warning("no viable prediction hypothesis")
        return PredictionSet([])
    hyps.sort(key=lambda h: (-h.log_lik, h.primitive_sequence))
    hyps = hyps[:top_k]
    lls = np.array([h.log_lik for h in hyps])
    w = np.exp(lls - lls.max())
    w /= w.sum()
    for h, wi in zip(hyps, w):
        h.weight = float(wi)
    return PredictionSet(hyps)
