"""The prediction model and batch training of one data set."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .gp import train_flowfield
from .grid import GridSpec, vectorize
from .segmentation import (MotionPrimitiveGraph, build_graph,
                           build_transition_matrix, segment_trajectory)
from .sparse_coding import Dictionary, SparseCodingConfig, learn_dictionary, sparse_code

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    coding: SparseCodingConfig = field(default_factory=SparseCodingConfig)
    gp_pseudo_inputs: int = 15
    gp_max_iters: int = 100
    gp_max_points: int = 400
    seed: int = 0


@dataclass
class Model:
    dictionary: Dictionary
    graph: MotionPrimitiveGraph
    grid: GridSpec
    episode: int = 0

    @property
    def n_primitives(self) -> int:
        return self.dictionary.L

    @property
    def n_transitions(self) -> int:
        return len(self.graph.edges)


def empty_model(grid: GridSpec) -> Model:
    return Model(Dictionary([]), MotionPrimitiveGraph([]), grid, 0)


def train_batch(trajs, grid: GridSpec, cfg: TrainConfig | None = None) -> Model:
    """Learn a model from scratch on resampled normalized trajectories."""
    cfg = cfg or TrainConfig()
    vectors, kept = [], []
    for tr in trajs:
        try:
            vectors.append(vectorize(tr, grid))
            kept.append(tr)
        except DataError as e:
            log.warning("skipping trajectory %s: %s", tr.id, e)
    if not vectors:
        raise DataError("no usable trajectories in batch")

    coding = SparseCodingConfig(**{**cfg.coding.__dict__, "seed": cfg.seed})
    dictionary, coeffs = learn_dictionary(vectors, coding)
    lam = coding.lam if coding.lam is not None else 0.1 * float(
        np.mean([v.to_dense() @ v.to_dense() for v in vectors]))

    segments_by_traj = []
    for tr, vec in zip(kept, vectors):
        code = sparse_code(vec, dictionary, lam)
        segments_by_traj.append(segment_trajectory(tr, grid, dictionary, code))
    T = build_transition_matrix(segments_by_traj, dictionary.L)
    graph = build_graph(T, segments_by_traj)
    for n, (key, edge) in enumerate(sorted(graph.edges.items())):
        edge.flow = train_flowfield(edge.samples, M=cfg.gp_pseudo_inputs,
                                    seed=cfg.seed + 7919 * (n + 1),
                                    max_points=cfg.gp_max_points,
                                    max_iters=cfg.gp_max_iters)
    return Model(dictionary, graph, grid, episode=1)
