"""End-to-end acceptance checks, one per shipped guarantee.

Each test prints a single PASS/FAIL line (bypassing capture) so the whole
gate can be read at a glance from the pytest output.
"""

import time

import numpy as np
import pytest

from sila.experiments import (MethodSpec, records_to_csv, run_episode_suite,
                              summarize)
from sila.fusion import (IndexMap, SimilarityGraph, _components,
                         build_similarity_graph, fuse_primitives,
                         resolve_components, similarity)
from sila.gp import gp_predict, gradient_check, incremental_update, predict_velocities, train_flowfield
from sila.grid import GridSpec, GridVector, grid_from_points
from sila.kernels import mhd_points
from sila.metrics import mhd
from sila.model import Model, train_batch
from sila.segmentation import EdgeData, MotionPrimitiveGraph
from sila.sparse_coding import Dictionary, SparseCodingConfig, learn_dictionary
from sila.store import load_model, save_model
from sila.synth import ScenarioConfig, generate_trajectories, make_template
from conftest import lean_config, make_atom


@pytest.fixture
def report(capsys):
    """PASS/FAIL announcer that bypasses output capture."""

    def announce(num, name, ok, detail=""):
        tail = f"  ({detail})" if detail else ""
        line = f"[criterion {num:2d}] {name}: {'PASS' if ok else 'FAIL'}{tail}"
        with capsys.disabled():
            print(line, flush=True)
        assert ok, line

    return announce


# ---------------------------------------------------------------------------
# shared expensive runs


@pytest.fixture(scope="module")
def suite_run():
    """5 trials x 20 episodes on one synthetic intersection, three methods."""
    tpl, frame = make_template("right", seed=0)
    trajs = generate_trajectories(tpl, frame,
                                  ScenarioConfig(n_trajectories=500, seed=0))
    methods = [MethodSpec("standard"), MethodSpec("sila", 0.7),
               MethodSpec("sila", 1.0)]
    t0 = time.perf_counter()
    records = run_episode_suite(trajs, frame, methods, batch_size=20, trials=5,
                                base_seed=0, cfg=lean_config(),
                                eval_episodes={1, 15}, eval_limit=25,
                                max_episodes=20)
    return records, time.perf_counter() - t0


@pytest.fixture(scope="module")
def timing_run():
    """Batch retraining vs SILA learn times over 20 episodes, 3 trials."""
    tpl, frame = make_template("right", seed=1)
    trajs = generate_trajectories(tpl, frame,
                                  ScenarioConfig(n_trajectories=500, seed=1))
    methods = [MethodSpec("batch"), MethodSpec("sila", 0.7)]
    records = run_episode_suite(trajs, frame, methods, batch_size=20, trials=3,
                                base_seed=1, cfg=lean_config(),
                                eval_episodes=set(), max_episodes=20)
    return records


def by_method(records, method):
    return [r for r in records if r.method == method]


# ---------------------------------------------------------------------------


def test_criterion_01_similarity_oracle(report):
    rng = np.random.default_rng(0)
    n_cells = 60

    def rand_atom(i):
        ks = rng.choice(n_cells, size=rng.integers(1, 12), replace=False)
        return make_atom(i, {int(k): rng.normal(size=2) for k in ks})

    t0 = time.perf_counter()
    max_err = 0.0
    for _ in range(1000):
        a, b = rand_atom(1), rand_atom(2)
        da, db = a.to_dense(n_cells), b.to_dense(n_cells)
        oracle = float(da @ db / (np.linalg.norm(da) * np.linalg.norm(db)))
        max_err = max(max_err, abs(similarity(a, b) - oracle))
    elapsed = time.perf_counter() - t0

    a = rand_atom(1)
    self_err = abs(similarity(a, a) - 1.0)
    disjoint = similarity(make_atom(1, {0: [1.0, 0.0]}),
                          make_atom(2, {1: [1.0, 0.0]}))
    ok = max_err < 1e-12 and self_err < 1e-12 and disjoint == 0.0 and elapsed < 5.0
    report(1, "similarity matches dense oracle", ok,
           f"max_err={max_err:.2e}, {elapsed:.2f}s")


def test_criterion_02_fusion_case_table(report):
    grid = GridSpec(20, 20, np.zeros(2), 1.0)

    def model_of(atom_cells, edges=()):
        atoms = [make_atom(i, c) for i, c in sorted(atom_cells.items())]
        g = MotionPrimitiveGraph([a.id for a in atoms],
                                 {e: EdgeData(1) for e in edges})
        return Model(Dictionary(atoms), g, grid, 1)

    def resolve(edges, m_hat, t_s=0.7):
        gs = SimilarityGraph({k for e in edges for k in e}, dict(edges))
        return resolve_components(gs, m_hat, IndexMap.identity(m_hat.graph.nodes), t_s)

    ok = True
    details = []

    # one edge: both nodes collapse onto the smaller index
    cells = {1: {0: [1.0, 0]}, 2: {1: [0.0, 1]}, 3: {2: [1.0, 0]},
             4: {0: [1.0, 0]}}
    idx, fs = resolve({(1, 4): 0.9}, model_of(cells))
    ok &= fs == [(1, 4)] and idx.resolve_in(4) == 1 and idx.resolve_out(4) == 1
    details.append("1-edge")

    # Case 1: neighbours already joined by a transition; center replaced
    cells = {1: {0: [1.0, 0]}, 2: {1: [1.0, 0]}, 3: {2: [1.0, 0]},
             4: {0: [1.0, 0], 1: [1.0, 0]}}
    idx, fs = resolve({(1, 4): 0.8, (2, 4): 0.8}, model_of(cells, [(1, 2)]))
    ok &= (fs == [] and idx.dropped == {4}
           and idx.resolve_in(4) == 1 and idx.resolve_out(4) == 2)
    details.append("case1")

    # Case 2: neighbours similar; all three fuse under the minimum index
    cells = {1: {0: [1.0, 0]}, 2: {0: [1.0, 0]}, 3: {2: [1.0, 0]},
             4: {0: [1.0, 0], 1: [1.0, 0]}}
    idx, fs = resolve({(1, 4): 0.8, (2, 4): 0.8}, model_of(cells))
    ok &= fs == [(1, 2, 4)] and all(idx.resolve_in(k) == 1 for k in (1, 2, 4))
    details.append("case2")

    # Case 3: neighbours dissimilar and unlinked; nothing changes
    cells = {1: {0: [1.0, 0]}, 2: {0: [0.0, 1]}, 3: {2: [1.0, 0]},
             4: {0: [1.0, 1.0]}}
    idx, fs = resolve({(1, 4): 0.71, (2, 4): 0.71}, model_of(cells))
    ok &= (fs == [] and idx.dropped == set()
           and all(idx.resolve_in(k) == k for k in (1, 2, 4)))
    details.append("case3")

    # three edges: the least-similar edge is relaxed first
    cells = {1: {0: [1.0, 0]}, 2: {0: [1.0, 0]}, 3: {5: [1.0, 0]},
             4: {0: [1.0, 0], 1: [1.0, 0]}}
    idx, fs = resolve({(1, 4): 0.9, (2, 4): 0.8, (3, 4): 0.72}, model_of(cells))
    ok &= fs == [(1, 2, 4)] and idx.resolve_in(3) == 3
    details.append("relax")

    # structural worked example: 13 accumulated atoms -> 10 after fusion
    d = lambda deg: [np.cos(np.deg2rad(deg)), np.sin(np.deg2rad(deg))]
    cells13 = {
        1: {100: [1.0, 0]},
        2: {0: [1.0, 0], 1: [1.0, 0]},
        3: {110: [1.0, 0]},
        4: {10: d(0), 11: d(0)},
        5: {10: d(60), 11: d(60)},
        6: {20: [1.0, 0], 21: [1.0, 0]},
        7: {0: [1.0, 0], 1: [1.0, 0]},
        8: {120: [1.0, 0]},
        9: {10: d(25), 11: d(25)},
        10: {130: [1.0, 0]},
        11: {10: [1.0, 0], 11: [1.0, 0], 14: [1.0, 0], 15: [1.0, 0]},
        12: {20: [1.0, 0], 21: [1.0, 0]},
        13: {20: [1.0, 0], 21: [1.0, 0]},
    }
    m_hat = model_of(cells13)
    atoms = m_hat.dictionary.atoms
    gs = build_similarity_graph(atoms[:6], atoms[6:], t_s=0.7)
    ok &= set(gs.edges) == {(2, 7), (6, 12), (6, 13), (4, 9), (5, 9), (4, 11)}
    ok &= len(_components(list(gs.edges))) == 3
    idx = IndexMap.identity(m_hat.graph.nodes)
    idx, fs = resolve_components(gs, m_hat, idx, 0.7)
    ok &= sorted(fs) == [(2, 7), (6, 12, 13)] and idx.dropped == set()
    fused, _ = fuse_primitives(fs, m_hat.dictionary, idx.dropped)
    ok &= fused.L == 10
    details.append(f"13->{fused.L} nodes, fuse_set={sorted(fs)}")

    report(2, "fusion case table and worked example", ok, "; ".join(details))


def test_criterion_03_ts_one_degeneracy(suite_run, report):
    records, _ = suite_run
    std = {(r.trial, r.episode): r for r in by_method(records, "standard")}
    sila = {(r.trial, r.episode): r for r in by_method(records, "sila:1")}
    ok = bool(std) and set(std) == set(sila)
    for key in std:
        ok &= (std[key].primitives == sila[key].primitives
               and std[key].transitions == sila[key].transitions)
    report(3, "t_s=1.0 equals standard accumulation size", ok,
           f"{len(std)} episode checks")


def test_criterion_04_size_ordering_and_growth(suite_run, report):
    records, elapsed = suite_run
    std = {(r.trial, r.episode): r for r in by_method(records, "standard")}
    sila = {(r.trial, r.episode): r for r in by_method(records, "sila:0.7")}
    ordering = all(sila[k].primitives <= std[k].primitives for k in std)
    growth = summarize(records)["growth_rates"]
    slope_ok = growth["sila:0.7"] < 0.8 * growth["standard"]
    time_ok = elapsed < 600.0
    report(4, "size ordering and growth slopes", ordering and slope_ok and time_ok,
           f"slopes sila={growth['sila:0.7']:.3f} std={growth['standard']:.3f}, "
           f"{elapsed:.0f}s")


def test_criterion_05_error_improves(suite_run, report):
    records, _ = suite_run
    sila = by_method(records, "sila:0.7")
    ep1 = [r.weighted_mhd for r in sila if r.episode == 1]
    ep15 = [r.weighted_mhd for r in sila if r.episode == 15]
    ok = (len(ep1) >= 5 and len(ep15) >= 5
          and np.all(np.isfinite(ep1)) and np.all(np.isfinite(ep15))
          and float(np.mean(ep15)) < float(np.mean(ep1)))
    report(5, "weighted MHD improves from episode 1 to 15", ok,
           f"ep1={np.mean(ep1):.3f} ep15={np.mean(ep15):.3f} over {len(ep1)} trials")


def test_criterion_06_timing_shape(timing_run, report):
    records = timing_run

    def med(method, ep):
        return float(np.median([r.learn_time_s for r in records
                                if r.method == method and r.episode == ep]))

    sila2, sila20 = med("sila:0.7", 2), med("sila:0.7", 20)
    batch2, batch20 = med("batch", 2), med("batch", 20)
    sila_ok = sila20 <= 2.0 * sila2
    batch_ok = batch20 >= 3.0 * batch2
    report(6, "constant-ish SILA time, growing batch time", sila_ok and batch_ok,
           f"sila {sila2:.2f}->{sila20:.2f}s, batch {batch2:.2f}->{batch20:.2f}s")


def test_criterion_07_gp_correctness(report):
    # (a) analytic vs finite-difference gradients on 10-point instances
    errs = []
    for seed in range(4):
        rng = np.random.default_rng(seed)
        X = rng.uniform(0, 4, size=(10, 2))
        data = np.column_stack([X, np.cos(0.6 * X[:, 1]), np.sin(0.5 * X[:, 0])])
        e = gradient_check(data, M=5, seed=seed)
        if e is not None:
            errs.append(e)
    grad_ok = bool(errs) and max(errs) < 1e-4

    # (b) pseudo-inputs pinned to the data reproduce exact-GP means
    from sila.gp import _k_cross
    rng = np.random.default_rng(10)
    X = rng.uniform(0, 4, size=(20, 2))
    y = np.cos(0.6 * X[:, 1]) + rng.normal(scale=0.1, size=20)
    data = np.column_stack([X, y, -y])
    ff = train_flowfield(data, M=20, seed=0)
    h = ff.gp_x.hyper
    Xq = rng.uniform(0.5, 3.5, size=(25, 2))
    K = _k_cross(X, X, h.lengthscale_a, h.lengthscale_b, h.signal_var)
    ks = _k_cross(Xq, X, h.lengthscale_a, h.lengthscale_b, h.signal_var)
    exact = ks @ np.linalg.solve(K + h.noise_var * np.eye(20), y)
    mean, _ = gp_predict(ff.gp_x, Xq)
    exact_err = float(np.max(np.abs(mean - exact)))
    exact_ok = exact_err < 1e-6

    # (c) incremental update close to joint retraining on the half/half task
    rng = np.random.default_rng(11)
    Xa = rng.uniform(0, 4, size=(160, 2))
    full = np.column_stack([Xa, np.cos(0.6 * Xa[:, 1]) + rng.normal(scale=0.05, size=160),
                            np.sin(0.5 * Xa[:, 0]) + rng.normal(scale=0.05, size=160)])
    joint = train_flowfield(full, M=12, seed=0)
    incr = incremental_update(train_flowfield(full[:80], M=12, seed=0), full[80:], seed=0)
    grid_pts = np.random.default_rng(2).uniform(0.5, 3.5, size=(100, 2))
    mj, _ = predict_velocities(joint, grid_pts)
    mi, _ = predict_velocities(incr, grid_pts)
    rms = float(np.sqrt(np.mean((mj - mi) ** 2)))
    incr_ok = rms < 0.1

    report(7, "GP gradients, exact-GP match, incremental refit",
           grad_ok and exact_ok and incr_ok,
           f"grad={max(errs):.1e}, exact={exact_err:.1e}, rms={rms:.3f}")


def test_criterion_08_mhd_oracle(report):
    def brute(a, b):
        def directed(p, q):
            return sum(min(float(np.hypot(*(x - y))) for y in q) for x in p) / len(p)
        return max(directed(a, b), directed(b, a))

    rng = np.random.default_rng(0)
    max_err = 0.0
    for _ in range(1000):
        a = rng.normal(scale=4, size=(rng.integers(1, 10), 2))
        b = rng.normal(scale=4, size=(rng.integers(1, 10), 2))
        max_err = max(max_err, abs(mhd(a, b) - brute(a, b)))
    worked = mhd([[0, 0], [1, 0]], [[0, 1]])
    ok = max_err < 1e-12 and abs(worked - 1.20711) < 1e-5
    report(8, "MHD matches brute-force oracle", ok,
           f"max_err={max_err:.2e}, worked={worked:.5f}")


def test_criterion_09_sparse_coding_sanity(report):
    rng = np.random.default_rng(4)
    vectors = []
    for _ in range(30):
        ks = rng.choice(50, size=6, replace=False)
        cells = {int(k): rng.normal(size=2) for k in ks}
        scale = np.sqrt(sum(v @ v for v in cells.values()))
        vectors.append(GridVector(50, {k: v / scale for k, v in cells.items()}))
    trace = []
    cfg = SparseCodingConfig(L_max=10, max_iters=50, tol=1e-15, seed=0)
    learn_dictionary(vectors, cfg, trace=trace)
    mono_ok = len(trace) >= 2 and np.all(np.diff(trace) <= 1e-9)

    def unit(cells):
        s = np.sqrt(sum(np.asarray(v) @ np.asarray(v) for v in cells.values()))
        return GridVector(30, {k: np.asarray(v, dtype=float) / s
                               for k, v in cells.items()})

    v1 = unit({0: [1, 0], 1: [1, 0]})
    v2 = unit({10: [0, 1], 11: [0, 1]})
    d, _ = learn_dictionary([v1] * 8 + [v2] * 8,
                            SparseCodingConfig(L_max=2, lam=1e-3, max_iters=80, seed=1))
    cos_ok = d.L == 2
    worst = 1.0
    for t in (v1.to_dense(), v2.to_dense()):
        best = max(abs(float(a.to_dense(30) @ t) / np.linalg.norm(a.to_dense(30)))
                   for a in d.atoms)
        worst = min(worst, best)
        cos_ok &= best >= 0.99
    report(9, "sparse coding monotone and recovers clusters", mono_ok and cos_ok,
           f"{len(trace)} iterations, worst cosine={worst:.4f}")


def test_criterion_10_determinism_and_persistence(tmp_path, report):
    tpl, frame = make_template("right", seed=2)
    trajs = generate_trajectories(tpl, frame,
                                  ScenarioConfig(n_trajectories=80, seed=2))
    methods = [MethodSpec("standard"), MethodSpec("sila", 0.7)]

    def run():
        return records_to_csv(run_episode_suite(
            trajs, frame, methods, batch_size=20, trials=1, base_seed=7,
            cfg=lean_config(), eval_episodes={3}, eval_limit=4, max_episodes=3))

    # wall-clock time is the one legitimately nondeterministic column
    def strip_time(csv_text):
        return "\n".join(line.rsplit(",", 1)[0]
                         for line in csv_text.strip().split("\n"))

    csv1, csv2 = run(), run()
    det_ok = strip_time(csv1) == strip_time(csv2)

    from sila.experiments import normalize_dataset
    norm = normalize_dataset(trajs, frame)
    grid = grid_from_points(np.vstack([t.points for t in norm]))
    model = train_batch(norm[:30], grid, lean_config())
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    probe = np.random.default_rng(0).uniform(-1, 6, size=(50, 2))
    max_dev = 0.0
    for key, e in model.graph.edges.items():
        e2 = loaded.graph.edges[key]
        for gp1, gp2 in ((e.flow.gp_x, e2.flow.gp_x), (e.flow.gp_y, e2.flow.gp_y)):
            m1, v1 = gp_predict(gp1, probe)
            m2, v2 = gp_predict(gp2, probe)
            max_dev = max(max_dev, float(np.max(np.abs(m1 - m2))),
                          float(np.max(np.abs(v1 - v2))))
    persist_ok = max_dev < 1e-12

    report(10, "deterministic CSV and lossless persistence",
           det_ok and persist_ok, f"probe deviation={max_dev:.1e}")
