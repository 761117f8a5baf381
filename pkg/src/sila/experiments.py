"""Episode-driven comparison harness: batch vs standard vs SILA."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError
from .frames import resample, to_common_frame
from .fusion import incremental_learning, standard_accumulate
from .grid import grid_from_points
from .metrics import timed, weighted_mhd
from .model import TrainConfig, empty_model, train_batch
from .predictor import Observation, predict
from .synth import ScenarioConfig, generate_trajectories, make_template, split_episodes

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MethodSpec:
    kind: str  # batch | standard | sila
    t_s: float | None = None

    def __post_init__(self):
        if self.kind not in ("batch", "standard", "sila"):
            raise DataError(f"unknown method kind {self.kind!r}")
        if self.kind == "sila" and not (self.t_s and 0.0 < self.t_s <= 1.0):
            raise DataError("sila needs t_s in (0, 1]")

    @property
    def name(self) -> str:
        return f"sila:{self.t_s:g}" if self.kind == "sila" else self.kind

    @classmethod
    def parse(cls, text: str) -> "MethodSpec":
        if text.startswith("sila"):
            _, _, ts = text.partition(":")
            if not ts:
                raise DataError("sila method needs a threshold, e.g. sila:0.7")
            return cls("sila", float(ts))
        return cls(text)


@dataclass
class EpisodeRecord:
    method: str
    trial: int
    episode: int
    weighted_mhd: float
    primitives: int
    transitions: int
    learn_time_s: float
    n_cumulative: int = 0  # trajectories consumed so far (not serialized)

    @property
    def total_size(self) -> int:
        return self.primitives + self.transitions


def normalize_dataset(trajs, frame, dt: float = 0.4):
    out = []
    for tr in trajs:
        try:
            out.append(resample(to_common_frame(tr, frame), dt))
        except DataError as e:
            log.warning("dropping trajectory %s: %s", tr.id, e)
    return out


def evaluate_model(model, test_trajs, obs_window: float = 3.2, horizon: float = 5.0,
                   dt: float = 0.4, limit: int | None = None):
    """Mean weighted MHD of predictions on held-out trajectories."""
    vals = []
    skipped = 0
    for tr in test_trajs[:limit]:
        t0 = tr.times[0]
        obs_mask = tr.times - t0 <= obs_window + 1e-9
        truth_mask = (~obs_mask) & (tr.times - t0 <= obs_window + horizon + 1e-9)
        if obs_mask.sum() < 2 or truth_mask.sum() < 1:
            skipped += 1
            continue
        try:
            preds = predict(Observation(tr.samples[obs_mask]), model,
                            horizon=horizon, dt=dt)
        except DataError:
            skipped += 1
            continue
        if not preds.hypotheses:
            skipped += 1
            continue
        vals.append((tr.id, weighted_mhd(preds, tr.samples[truth_mask][:, 1:3])))
    mean = float(np.mean([v for _, v in vals])) if vals else float("nan")
    return mean, vals, skipped


def _episode_cfg(cfg: TrainConfig, seed: int) -> TrainConfig:
    return replace(cfg, seed=seed)


def run_episode_suite(trajs, frame, methods, batch_size: int, trials: int,
                      base_seed: int, grid=None, dt: float = 0.4,
                      cfg: TrainConfig | None = None, eval_episodes=None,
                      eval_limit: int | None = None, horizon: float = 5.0,
                      obs_window: float = 3.2, max_episodes: int | None = None,
                      test_frac: float = 0.15) -> list[EpisodeRecord]:
    """Experiment-1 protocol: shuffled batches of one intersection's data."""
    if not methods:
        raise DataError("no methods given")
    cfg = cfg or TrainConfig()
    norm = normalize_dataset(trajs, frame, dt)
    if grid is None:
        grid = grid_from_points(np.vstack([t.points for t in norm]))
    records = []
    for trial in range(trials):
        trial_seed = base_seed + 10007 * (trial + 1)
        test, batches = split_episodes(norm, batch_size, trial_seed,
                                       test_frac=test_frac, split_seed=base_seed)
        if max_episodes is not None:
            batches = batches[:max_episodes]
        state = {m.name: empty_model(grid) for m in methods}
        seen: list = []
        incremental = [m for m in methods if m.kind in ("standard", "sila")]
        for ep, batch in enumerate(batches, start=1):
            seen = seen + batch
            ep_seed = base_seed + 104729 * (trial + 1) + 131 * ep
            m_new = t_new = None
            if incremental:
                m_new, t_new = timed(train_batch, batch, grid, _episode_cfg(cfg, ep_seed))
            for m in methods:
                if m.kind == "batch":
                    model, t = timed(train_batch, seen, grid, _episode_cfg(cfg, ep_seed))
                elif m.kind == "standard":
                    model, t = timed(standard_accumulate, state[m.name], m_new)
                    t += t_new
                else:
                    model, t = timed(incremental_learning, state[m.name], m_new,
                                     m.t_s, gp_seed=ep_seed)
                    t += t_new
                state[m.name] = model
                err = float("nan")
                if eval_episodes is None or ep in eval_episodes:
                    err, _, _ = evaluate_model(model, test, obs_window, horizon,
                                               dt, limit=eval_limit)
                records.append(EpisodeRecord(m.name, trial, ep, err,
                                             model.n_primitives, model.n_transitions,
                                             t, n_cumulative=len(seen)))
    return records


def multi_intersection_suite(kinds, methods, trials: int, base_seed: int,
                             n_train: int = 79, n_test: int = 13,
                             noise_std: float = 0.1, dt: float = 0.4,
                             cfg: TrainConfig | None = None,
                             eval_limit: int | None = None,
                             horizon: float = 5.0, obs_window: float = 3.2
                             ) -> list[EpisodeRecord]:
    """Experiment-2 protocol: one episode per intersection visited."""
    if len(kinds) < 2:
        raise DataError("need at least 2 intersections")
    cfg = cfg or TrainConfig()
    pools = []
    for k, kind in enumerate(kinds):
        tpl, frame = make_template(kind, seed=base_seed + k)
        scfg = ScenarioConfig(n_trajectories=n_train + n_test, noise_std=noise_std,
                              seed=base_seed + 977 * k)
        raw = generate_trajectories(tpl, frame, scfg)
        norm = normalize_dataset(raw, frame, dt)
        pools.append((norm[:n_train], norm[n_train : n_train + n_test]))
    grid = grid_from_points(np.vstack([t.points for tr, te in pools for t in tr + te]))

    records = []
    for trial in range(trials):
        order = np.random.default_rng(base_seed + 65537 * (trial + 1)).permutation(len(pools))
        state = {m.name: empty_model(grid) for m in methods}
        seen_train: list = []
        seen_test: list = []
        for ep, pi in enumerate(order, start=1):
            train, test = pools[pi]
            seen_train = seen_train + train
            seen_test = seen_test + test
            ep_seed = base_seed + 104729 * (trial + 1) + 131 * ep
            m_new = t_new = None
            if any(m.kind in ("standard", "sila") for m in methods):
                m_new, t_new = timed(train_batch, train, grid, _episode_cfg(cfg, ep_seed))
            for m in methods:
                if m.kind == "batch":
                    model, t = timed(train_batch, seen_train, grid, _episode_cfg(cfg, ep_seed))
                elif m.kind == "standard":
                    model, t = timed(standard_accumulate, state[m.name], m_new)
                    t += t_new
                else:
                    model, t = timed(incremental_learning, state[m.name], m_new,
                                     m.t_s, gp_seed=ep_seed)
                    t += t_new
                state[m.name] = model
                err, _, _ = evaluate_model(model, seen_test, obs_window, horizon,
                                           dt, limit=eval_limit)
                records.append(EpisodeRecord(m.name, trial, ep, err,
                                             model.n_primitives, model.n_transitions,
                                             t, n_cumulative=len(seen_train)))
    return records


def summarize(records: list[EpisodeRecord]):
    """Per-(method, episode) means/stds and per-method size growth slopes."""
    if not records:
        raise DataError("no records to summarize")
    per_key: dict[tuple[str, int], list[EpisodeRecord]] = {}
    for r in records:
        per_key.setdefault((r.method, r.episode), []).append(r)
    rows = []
    for (method, ep) in sorted(per_key):
        rs = per_key[(method, ep)]
        errs = np.array([r.weighted_mhd for r in rs])
        errs = errs[np.isfinite(errs)]
        rows.append({
            "method": method,
            "episode": ep,
            "mhd_mean": float(errs.mean()) if errs.size else float("nan"),
            "mhd_std": float(errs.std()) if errs.size else float("nan"),
            "primitives_mean": float(np.mean([r.primitives for r in rs])),
            "transitions_mean": float(np.mean([r.transitions for r in rs])),
            "total_size_mean": float(np.mean([r.total_size for r in rs])),
            "learn_time_mean": float(np.mean([r.learn_time_s for r in rs])),
        })
    slopes: dict[str, list[float]] = {}
    by_mt: dict[tuple[str, int], list[EpisodeRecord]] = {}
    for r in records:
        by_mt.setdefault((r.method, r.trial), []).append(r)
    for (method, _trial), rs in sorted(by_mt.items()):
        rs = sorted(rs, key=lambda r: r.episode)
        x = np.array([r.n_cumulative for r in rs], dtype=float)
        y = np.array([r.total_size for r in rs], dtype=float)
        if len(rs) >= 2 and np.ptp(x) > 0:
            slopes.setdefault(method, []).append(float(np.polyfit(x, y, 1)[0]))
    growth = {m: float(np.mean(v)) for m, v in slopes.items()}
    return {"per_episode": rows, "growth_rates": growth}


# ---------------------------------------------------------------------------
# CSV / SVG output

RESULTS_HEADER = "method,trial,episode,weighted_mhd,primitives,transitions,total_size,learn_time_s"


def records_to_csv(records: list[EpisodeRecord]) -> str:
    lines = [RESULTS_HEADER]
    for r in records:
        lines.append(f"{r.method},{r.trial},{r.episode},{r.weighted_mhd!r},"
                     f"{r.primitives},{r.transitions},{r.total_size},{r.learn_time_s!r}")
    return "\n".join(lines) + "\n"


def summary_to_csv(summary) -> str:
    cols = ["method", "episode", "mhd_mean", "mhd_std", "primitives_mean",
            "transitions_mean", "total_size_mean", "learn_time_mean"]
    lines = [",".join(cols)]
    for row in summary["per_episode"]:
        lines.append(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c])
                              for c in cols))
    lines.append("")
    lines.append("method,growth_rate")
    for m, g in sorted(summary["growth_rates"].items()):
        lines.append(f"{m},{g!r}")
    return "\n".join(lines) + "\n"


def svg_line_chart(series: dict[str, list[tuple[float, float]]], title: str,
                   width: int = 640, height: int = 400) -> str:
    """Minimal multi-series line chart; series maps label -> [(x, y)]."""
    pad = 50
    pts_all = [p for pts in series.values() for p in pts if np.isfinite(p[1])]
    if not pts_all:
        return f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"/>'
    xs = [p[0] for p in pts_all]
    ys = [p[1] for p in pts_all]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    colors = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<text x="{width/2}" y="20" text-anchor="middle">{title}</text>',
             f'<rect x="{pad}" y="{pad}" width="{width-2*pad}" height="{height-2*pad}" '
             'fill="none" stroke="#999"/>',
             f'<text x="{pad}" y="{height-pad+16}" font-size="10">{x0:g}</text>',
             f'<text x="{width-pad}" y="{height-pad+16}" text-anchor="end" font-size="10">{x1:g}</text>',
             f'<text x="{pad-4}" y="{height-pad}" text-anchor="end" font-size="10">{y0:.3g}</text>',
             f'<text x="{pad-4}" y="{pad+4}" text-anchor="end" font-size="10">{y1:.3g}</text>']
    for n, (label, pts) in enumerate(sorted(series.items())):
        color = colors[n % len(colors)]
        coords = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in pts if np.isfinite(y))
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{width-pad+4}" y="{pad+14*n+10}" font-size="10" '
                     f'fill="{color}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts)
