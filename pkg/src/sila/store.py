"""Versioned model persistence (canonical JSON) and atomic file writes."""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .errors import ModelFileError
from .gp import FlowField, GPHyperparams, SparseGP
from .grid import GridSpec, MotionPrimitive
from .model import Model
from .segmentation import EdgeData, MotionPrimitiveGraph
from .sparse_coding import Dictionary

FORMAT_VERSION = 1


def atomic_write(path, text: str):
    """Write via temp file + rename so interrupted runs never leave partials."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _gp_to_dict(gp: SparseGP):
    h = gp.hyper
    return {
        "pseudo_inputs": gp.pseudo_inputs.tolist(),
        "lengthscale_a": h.lengthscale_a,
        "lengthscale_b": h.lengthscale_b,
        "signal_var": h.signal_var,
        "noise_var": h.noise_var,
        "mean_weights": gp.mean_weights.tolist(),
        "cov_correction": gp.cov_correction.tolist(),
    }


def _gp_from_dict(d) -> SparseGP:
    return SparseGP(
        np.array(d["pseudo_inputs"], dtype=float),
        GPHyperparams(d["lengthscale_a"], d["lengthscale_b"], d["signal_var"], d["noise_var"]),
        np.array(d["mean_weights"], dtype=float),
        np.array(d["cov_correction"], dtype=float),
    )


def model_to_dict(model: Model) -> dict:
    return {
        "version": FORMAT_VERSION,
        "grid": {
            "rows": model.grid.rows,
            "cols": model.grid.cols,
            "min_corner": model.grid.min_corner.tolist(),
            "cell_size": model.grid.cell_size,
        },
        "episode": model.episode,
        "primitives": [
            {
                "id": a.id,
                "cells": [
                    {"index": k, "vx": v[0], "vy": v[1]}
                    for k, v in sorted(a.cells.items())
                ],
            }
            for a in model.dictionary.atoms
        ],
        "transitions": [
            {
                "from": i,
                "to": j,
                "count": e.count,
                "training_count": e.flow.training_count if e.flow else 0,
                "gp_x": _gp_to_dict(e.flow.gp_x) if e.flow else None,
                "gp_y": _gp_to_dict(e.flow.gp_y) if e.flow else None,
            }
            for (i, j), e in sorted(model.graph.edges.items())
        ],
    }


def model_from_dict(d) -> Model:
    try:
        if d.get("version") != FORMAT_VERSION:
            raise ModelFileError(f"unsupported model file version {d.get('version')!r}")
        g = d["grid"]
        grid = GridSpec(g["rows"], g["cols"], np.array(g["min_corner"]), g["cell_size"])
        atoms = []
        for p in d["primitives"]:
            cells = {int(c["index"]): np.array([c["vx"], c["vy"]]) for c in p["cells"]}
            atoms.append(MotionPrimitive(int(p["id"]), cells))
        edges = {}
        for t in d["transitions"]:
            flow = None
            if t["gp_x"] is not None:
                flow = FlowField(_gp_from_dict(t["gp_x"]), _gp_from_dict(t["gp_y"]),
                                 int(t["training_count"]))
            edges[(int(t["from"]), int(t["to"]))] = EdgeData(int(t["count"]), None, flow)
        graph = MotionPrimitiveGraph([a.id for a in atoms], edges)
        return Model(Dictionary(atoms), graph, grid, int(d["episode"]))
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFileError(f"malformed model file: missing/bad field {e}") from e


def save_model(model: Model, path):
    atomic_write(path, json.dumps(model_to_dict(model), sort_keys=True,
                                  separators=(",", ":")) + "\n")


def load_model(path) -> Model:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as e:
        raise ModelFileError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ModelFileError(f"{path}: line {e.lineno}: {e.msg}") from e
    if not isinstance(d, dict):
        raise ModelFileError(f"{path}: model file must contain a JSON object")
    return model_from_dict(d)
