"""Command-line entry points tying the pipeline together."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .errors import SilaError
from .experiments import (MethodSpec, evaluate_model, multi_intersection_suite,
                          normalize_dataset, records_to_csv, run_episode_suite,
                          summarize, summary_to_csv, svg_line_chart)
from .frames import (load_frame, load_trajectories, resample, save_frame,
                     save_trajectories, to_common_frame)
from .fusion import incremental_learning, standard_accumulate
from .grid import grid_from_points
from .metrics import timed
from .model import TrainConfig, train_batch
from .predictor import Observation, predict
from .sparse_coding import SparseCodingConfig
from .store import atomic_write, load_model, save_model
from .synth import ScenarioConfig, generate_trajectories, make_template

log = logging.getLogger("sila")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _train_config(args) -> TrainConfig:
    coding = SparseCodingConfig(L_max=args.atoms, lam=args.lam,
                                max_iters=args.coding_iters, seed=args.seed)
    return TrainConfig(coding=coding, gp_pseudo_inputs=args.pseudo_inputs,
                       gp_max_iters=args.gp_iters, gp_max_points=args.gp_max_points,
                       seed=args.seed)


def _add_train_opts(p):
    p.add_argument("--atoms", type=int, default=40, help="max dictionary atoms")
    p.add_argument("--lam", type=float, default=None, help="sparse coding l1 weight")
    p.add_argument("--coding-iters", type=int, default=100)
    p.add_argument("--pseudo-inputs", type=int, default=15)
    p.add_argument("--gp-iters", type=int, default=100)
    p.add_argument("--gp-max-points", type=int, default=400)
    p.add_argument("--dt", type=float, default=0.4, help="resampling step (s)")
    p.add_argument("--grid-rows", type=int, default=25)
    p.add_argument("--grid-cols", type=int, default=29)


def _load_normalized(args):
    trajs = load_trajectories(args.data)
    frame = load_frame(args.frame)
    return normalize_dataset(trajs, frame, args.dt)


def cmd_generate(args) -> int:
    tpl, frame = make_template(args.template, seed=args.seed)
    cfg = ScenarioConfig(n_trajectories=args.n, noise_std=args.noise,
                         truncate_prob=args.truncate_prob, seed=args.seed)
    trajs = generate_trajectories(tpl, frame, cfg)
    os.makedirs(args.out, exist_ok=True)
    save_trajectories(trajs, os.path.join(args.out, "trajectories.csv"))
    save_frame(frame, os.path.join(args.out, "frame.json"))
    print(f"wrote {len(trajs)} trajectories to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    norm = _load_normalized(args)
    grid = grid_from_points(np.vstack([t.points for t in norm]),
                            rows=args.grid_rows, cols=args.grid_cols)
    model, secs = timed(train_batch, norm, grid, _train_config(args))
    save_model(model, args.out)
    print(f"trained model: {model.n_primitives} primitives, "
          f"{model.n_transitions} transitions in {secs:.2f}s -> {args.out}")
    return EXIT_OK


def cmd_update(args) -> int:
    prev = load_model(args.model)
    norm = _load_normalized(args)
    cfg = _train_config(args)
    m_new = train_batch(norm, prev.grid, cfg)
    if args.mode == "sila":
        model = incremental_learning(prev, m_new, args.ts, gp_seed=args.seed)
    else:
        model = standard_accumulate(prev, m_new)
    save_model(model, args.out)
    print(f"updated model ({args.mode}): {model.n_primitives} primitives, "
          f"{model.n_transitions} transitions -> {args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(args.model)
    norm = _load_normalized(args)
    results = []
    for tr in norm:
        t0 = tr.times[0]
        obs = tr.samples[tr.times - t0 <= args.obs_window + 1e-9]
        if obs.shape[0] < 2:
            log.warning("trajectory %s shorter than the observation window", tr.id)
            continue
        preds = predict(Observation(obs), model, horizon=args.horizon, dt=args.dt)
        results.append({
            "traj_id": tr.id,
            "observation": obs.tolist(),
            "hypotheses": [
                {"weight": h.weight, "nll": -h.log_lik, "points": h.path.tolist()}
                for h in preds.hypotheses
            ],
        })
    atomic_write(args.out, json.dumps(results, sort_keys=True) + "\n")
    print(f"wrote predictions for {len(results)} trajectories -> {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    norm = _load_normalized(args)
    mean, per_traj, skipped = evaluate_model(model, norm, obs_window=args.obs_window,
                                             horizon=args.horizon, dt=args.dt)
    report = {
        "weighted_mhd_mean": mean,
        "per_trajectory": [{"traj_id": i, "weighted_mhd": v} for i, v in per_traj],
        "model_primitives": model.n_primitives,
        "model_transitions": model.n_transitions,
        "skipped": skipped,
    }
    atomic_write(args.out, json.dumps(report, sort_keys=True) + "\n")
    print(f"weighted MHD mean {mean:.4f} over {len(per_traj)} trajectories "
          f"({skipped} skipped) -> {args.out}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    methods = [MethodSpec.parse(m) for m in args.methods.split(",")]
    cfg = _train_config(args)
    if args.protocol == "single":
        if args.data:
            trajs = load_trajectories(args.data)
            frame = load_frame(args.frame)
        else:
            tpl, frame = make_template(args.template, seed=args.seed)
            trajs = generate_trajectories(tpl, frame, ScenarioConfig(
                n_trajectories=args.n, noise_std=args.noise, seed=args.seed))
        records = run_episode_suite(trajs, frame, methods, args.batch_size,
                                    args.trials, args.seed, dt=args.dt, cfg=cfg,
                                    eval_limit=args.eval_limit,
                                    max_episodes=args.episodes)
    else:
        kinds = args.intersections.split(",")
        records = multi_intersection_suite(kinds, methods, args.trials, args.seed,
                                           noise_std=args.noise, dt=args.dt, cfg=cfg,
                                           eval_limit=args.eval_limit)
    os.makedirs(args.out, exist_ok=True)
    atomic_write(os.path.join(args.out, "results.csv"), records_to_csv(records))
    atomic_write(os.path.join(args.out, "summary.csv"), summary_to_csv(summarize(records)))
    print(f"wrote {len(records)} records -> {args.out}/results.csv")
    return EXIT_OK


def cmd_plot(args) -> int:
    import csv as _csv

    with open(args.results, newline="") as fh:
        rows = list(_csv.DictReader(fh))
    if not rows:
        raise SilaError(f"{args.results}: no records")
    os.makedirs(args.out, exist_ok=True)
    methods = sorted({r["method"] for r in rows})

    def series(ycol, xcol="episode"):
        out = {}
        for m in methods:
            pts: dict[float, list[float]] = {}
            for r in rows:
                if r["method"] != m:
                    continue
                y = float(r[ycol])
                if np.isfinite(y):
                    pts.setdefault(float(r[xcol]), []).append(y)
            out[m] = sorted((x, float(np.mean(v))) for x, v in pts.items())
        return out

    charts = [
        ("error_vs_episode.svg", series("weighted_mhd"), "weighted MHD vs episode"),
        ("size_vs_episode.svg", series("total_size"), "model size vs episode"),
        ("time_vs_episode.svg", series("learn_time_s"), "learning time (s) vs episode"),
    ]
    for fname, data, title in charts:
        atomic_write(os.path.join(args.out, fname), svg_line_chart(data, title))
    print(f"wrote {len(charts)} charts -> {args.out}")
    return EXIT_OK


def build_parser() -> _Parser:
    p = _Parser(prog="sila", description=__doc__)
    p.add_argument("--jobs", type=int, default=1, help="worker cap for parallel stages")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate synthetic intersection data")
    g.add_argument("--template", choices=("right", "open", "closed"), default="right")
    g.add_argument("--n", type=int, default=200)
    g.add_argument("--noise", type=float, default=0.1)
    g.add_argument("--truncate-prob", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_generate)

    t = sub.add_parser("train", help="batch-train a model from a trajectory CSV")
    t.add_argument("--data", required=True)
    t.add_argument("--frame", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=0)
    _add_train_opts(t)
    t.set_defaults(fn=cmd_train)

    u = sub.add_parser("update", help="update a model with a new batch")
    u.add_argument("--model", required=True)
    u.add_argument("--data", required=True)
    u.add_argument("--frame", required=True)
    u.add_argument("--mode", choices=("sila", "standard"), default="sila")
    u.add_argument("--ts", type=float, default=0.7, help="similarity threshold")
    u.add_argument("--out", required=True)
    u.add_argument("--seed", type=int, default=0)
    _add_train_opts(u)
    u.set_defaults(fn=cmd_update)

    pr = sub.add_parser("predict", help="predict futures for observed trajectories")
    pr.add_argument("--model", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--frame", required=True)
    pr.add_argument("--horizon", type=float, default=5.0)
    pr.add_argument("--obs-window", type=float, default=3.2)
    pr.add_argument("--dt", type=float, default=0.4)
    pr.add_argument("--out", required=True)
    pr.set_defaults(fn=cmd_predict)

    e = sub.add_parser("evaluate", help="weighted-MHD evaluation on a test CSV")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--frame", required=True)
    e.add_argument("--horizon", type=float, default=5.0)
    e.add_argument("--obs-window", type=float, default=3.2)
    e.add_argument("--dt", type=float, default=0.4)
    e.add_argument("--out", required=True)
    e.set_defaults(fn=cmd_evaluate)

    x = sub.add_parser("experiment", help="episode-driven method comparison")
    x.add_argument("--methods", default="batch,standard,sila:0.5,sila:0.7,sila:1.0")
    x.add_argument("--protocol", choices=("single", "multi"), default="single")
    x.add_argument("--trials", type=int, default=12)
    x.add_argument("--batch-size", type=int, default=20)
    x.add_argument("--episodes", type=int, default=None)
    x.add_argument("--n", type=int, default=500, help="synthetic dataset size")
    x.add_argument("--noise", type=float, default=0.1)
    x.add_argument("--template", choices=("right", "open", "closed"), default="right")
    x.add_argument("--intersections", default="right,open,closed,right,open")
    x.add_argument("--data", default=None, help="trajectory CSV (else synthetic)")
    x.add_argument("--frame", default=None)
    x.add_argument("--eval-limit", type=int, default=None)
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--out", required=True)
    _add_train_opts(x)
    x.set_defaults(fn=cmd_experiment)

    pl = sub.add_parser("plot", help="SVG charts from a results CSV")
    pl.add_argument("--results", required=True)
    pl.add_argument("--out", required=True)
    pl.set_defaults(fn=cmd_plot)
    return p


def main(argv=None) -> int:
    level = os.environ.get("SILA_LOG", "warn").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.fn(args)
    except SilaError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
