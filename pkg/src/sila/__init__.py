"""Similarity-based incremental learning of pedestrian motion models."""

from .errors import DataError, ModelFileError, SilaError
from .frames import (IntersectionFrame, NormalizedTrajectory, RawTrajectory,
                     from_common_frame, resample, to_common_frame)
from .fusion import (FuseSet, IndexMap, SimilarityGraph, accumulate,
                     build_similarity_graph, fuse_primitives, incremental_learning,
                     reindex_and_fuse_edges, resolve_components, similarity,
                     standard_accumulate)
from .gp import (FlowField, GPHyperparams, SparseGP, gradient_check,
                 incremental_update, log_likelihood, predict_velocity,
                 train_flowfield)
from .grid import (GridSpec, GridVector, MotionPrimitive, grid_from_points,
                   inner_product, vectorize)
from .metrics import EvalReport, mhd, model_size, timed, weighted_mhd
from .model import Model, TrainConfig, empty_model, train_batch
from .predictor import (Hypothesis, Observation, PredictionSet,
                        classify_observation, enumerate_paths, predict, rollout)
from .segmentation import (MotionPrimitiveGraph, Segment, build_graph,
                           build_transition_matrix, segment_trajectory)
from .sparse_coding import (Coefficients, Dictionary, SparseCodingConfig,
                            learn_dictionary, objective, sparse_code)
from .store import load_model, save_model
from .synth import (IntersectionTemplate, ScenarioConfig, generate_trajectories,
                    make_template, split_episodes)

__version__ = "0.1.0"
