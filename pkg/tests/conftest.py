import numpy as np
import pytest

from sila.gp import train_flowfield
from sila.grid import GridSpec, MotionPrimitive
from sila.model import Model
from sila.segmentation import EdgeData, MotionPrimitiveGraph
from sila.sparse_coding import Dictionary


def unit_cells(cells):
    """cell -> direction mapping with unit-normalized vectors."""
    out = {}
    for k, v in cells.items():
        v = np.asarray(v, dtype=float)
        out[k] = v / np.linalg.norm(v)
    return out


def make_atom(atom_id, cells):
    return MotionPrimitive(atom_id, {k: np.asarray(v, dtype=float) for k, v in cells.items()})


def constant_field_data(vx, vy, lo=0.0, hi=3.0, n=25, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(lo, hi, size=(n, 2))
    return np.column_stack([X, np.full(n, vx), np.full(n, vy)])


def build_model(grid: GridSpec, atoms, edges, flows=None):
    """Hand-built model; edges is {(i, j): count}, flows {(i, j): data}."""
    d = Dictionary([make_atom(i, c) for i, c in atoms.items()])
    edata = {}
    for key, count in edges.items():
        flow = None
        samples = None
        if flows and key in flows:
            samples = np.asarray(flows[key], dtype=float)
            flow = train_flowfield(samples, M=8, seed=0, max_iters=40)
        edata[key] = EdgeData(count, samples, flow)
    graph = MotionPrimitiveGraph(sorted(atoms), edata)
    return Model(d, graph, grid, episode=1)


def lean_config():
    """Small training configuration keeping suite runtimes reasonable."""
    from sila.model import TrainConfig
    from sila.sparse_coding import SparseCodingConfig

    return TrainConfig(coding=SparseCodingConfig(L_max=15, max_iters=40),
                       gp_pseudo_inputs=10, gp_max_iters=40, gp_max_points=200)


@pytest.fixture
def small_grid():
    return GridSpec(4, 5, np.zeros(2), 1.0)
