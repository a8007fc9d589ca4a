"""Distribution-matching evaluation: per-metric Jensen-Shannon divergence tables.

The divergence is computed exactly as (KL(P||Mix) + KL(Q||Mix)) / 2 in nats on
smoothed histograms over the pooled range of both samples, one metric at a
time. The "All" row is the arithmetic mean of the per-metric values.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import env as E
from .summarize import (EXTENDED_NAMES, METRIC_NAMES, ExpertDataset, NormalizationStats,
                        extended_metrics, normalize, summarize)

SPLITS = ("train", "test")


class EmptySamples(ValueError):
    pass


@dataclass(frozen=True)
class JsdConfig:
    bin_count: int = 20
    alpha: float = 1e-3

    def __post_init__(self):
        if self.bin_count < 2:
            raise ValueError("bin_count must be >= 2")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")


def _hist(x, lo, hi, cfg):
    counts, _ = np.histogram(x, bins=cfg.bin_count, range=(lo, hi))
    mass = counts / len(x) + cfg.alpha
    return mass / mass.sum()


def jsd_1d(samples_p, samples_q, cfg: JsdConfig = JsdConfig()) -> float:
    p_raw = np.asarray(samples_p, dtype=float).ravel()
    q_raw = np.asarray(samples_q, dtype=float).ravel()
    if p_raw.size == 0 or q_raw.size == 0:
        raise EmptySamples("both sample sets must be nonempty")
    lo = min(p_raw.min(), q_raw.min())
    hi = max(p_raw.max(), q_raw.max())
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    p = _hist(p_raw, lo, hi, cfg)
    q = _hist(q_raw, lo, hi, cfg)
    mix = 0.5 * (p + q)
    kl_p = float(np.sum(p * np.log(p / mix)))
    kl_q = float(np.sum(q * np.log(q / mix)))
    # sum in a fixed order so that jsd(P, Q) == jsd(Q, P) bit for bit
    a, b = sorted((kl_p, kl_q))
    return max((a + b) / 2.0, 0.0)


def jsd_table(agent: np.ndarray, expert: np.ndarray, stats: NormalizationStats,
              cfg: JsdConfig = JsdConfig()) -> dict:
    """Per-metric JSD on normalized values plus the "All" mean."""
    a = normalize(agent, stats)
    e = normalize(expert, stats)
    out = {name: jsd_1d(a[:, i], e[:, i], cfg) for i, name in enumerate(METRIC_NAMES)}
    out["All"] = float(np.mean([out[n] for n in METRIC_NAMES]))
    return out


# --------------------------------------------------------------------------
# Rollouts
# --------------------------------------------------------------------------

# An episode runner plays one episode on a level and returns the final EventLog.
EpisodeRunner = Callable[[E.LevelSpec, np.random.Generator], E.EventLog]


def policy_runner(pp, latent: bool = True) -> EpisodeRunner:
    from .policy import collect_episode

    def run(level, rng):
        return collect_episode(level, pp, rng, latent=latent).log
    return run


def expert_runner(styles: Sequence[E.StyleParams]) -> EpisodeRunner:
    """Uniform mixture over scripted styles (one style per episode)."""

    def run(level, rng):
        style = styles[int(rng.integers(len(styles)))]
        state, _ = E.play_episode(level, lambda s, o, m: E.scripted_expert_policy(style, s, rng))
        return state.log
    return run


def rollout(runner: EpisodeRunner, levels: Sequence[E.LevelSpec], n_episodes: int,
            rng: np.random.Generator):
    """Round-robin over levels. Returns (raw metrics (n, M), list of extended-metric dicts)."""
    metrics, ext = [], []
    for i in range(n_episodes):
        log = runner(levels[i % len(levels)], rng)
        metrics.append(summarize(log))
        ext.append(extended_metrics(log))
    return np.array(metrics), ext


def average_report(metrics: np.ndarray, ext: list) -> dict:
    """Average game metrics: the 7 training metrics then the extended ones (percent for outcomes)."""
    out = {name: float(metrics[:, i].mean()) for i, name in enumerate(METRIC_NAMES)}
    for name in EXTENDED_NAMES:
        vals = np.array([e[name] for e in ext], dtype=float)
        vals = vals[~np.isnan(vals)]
        v = float(vals.mean()) if len(vals) else float("nan")
        out[name] = 100.0 * v if name in ("win", "lose", "draw") else v
    return out


@dataclass
class EvalReport:
    jsd: dict                      # split -> {metric: value, "All": mean}
    averages: dict                 # split -> {metric: average}
    counts: dict                   # split -> (n_agent, n_expert)
    agent_metrics: dict = field(default_factory=dict, repr=False)  # split -> raw (n, M)

    def variances(self, split: str = "train") -> dict:
        x = self.agent_metrics[split]
        return {n: float(x[:, i].var()) for i, n in enumerate(METRIC_NAMES)}

    def to_dict(self) -> dict:
        return {"jsd": self.jsd, "averages": self.averages,
                "counts": {k: list(v) for k, v in self.counts.items()},
                "variances": {s: self.variances(s) for s in self.agent_metrics}}


def evaluate_agent(runner: EpisodeRunner, levels: dict, n_episodes: int, expert: ExpertDataset,
                   stats: NormalizationStats, cfg: JsdConfig = JsdConfig(), seed: int = 0) -> EvalReport:
    """Roll the agent out on each split's levels and compare against that split's experts.

    ``levels`` maps split name to a list of LevelSpecs.
    """
    if n_episodes < 50:
        raise ValueError("use at least 50 episodes per level set")
    jsd, avgs, counts, raw = {}, {}, {}, {}
    for k, split in enumerate(SPLITS):
        if split not in levels:
            continue
        rng = np.random.default_rng([seed, k])
        metrics, ext = rollout(runner, levels[split], n_episodes, rng)
        ref = expert.subset(split).metrics
        jsd[split] = jsd_table(metrics, ref, stats, cfg)
        avgs[split] = average_report(metrics, ext)
        counts[split] = (len(metrics), len(ref))
        raw[split] = metrics
    return EvalReport(jsd=jsd, averages=avgs, counts=counts, agent_metrics=raw)


# --------------------------------------------------------------------------
# Tables
# --------------------------------------------------------------------------

JSD_ROWS = METRIC_NAMES + ("All",)
ABSOLUTE_ROWS = METRIC_NAMES + EXTENDED_NAMES


def _num(v: float) -> str:
    return repr(float(v))


def jsd_table_csv(columns: dict) -> str:
    """Ablation/comparison layout: one row per (split, metric), one column per agent."""
    names = list(columns)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["split", "metric"] + names)
    for split in SPLITS:
        for row in JSD_ROWS:
            cells = []
            for n in names:
                rep = columns[n]
                jsd = rep.jsd if isinstance(rep, EvalReport) else rep
                cells.append(_num(jsd[split][row]) if jsd and split in jsd else "nan")
            w.writerow([split, row] + cells)
    return buf.getvalue()


def parse_jsd_table_csv(text: str) -> dict:
    rows = list(csv.reader(io.StringIO(text)))
    names = rows[0][2:]
    out = {n: {} for n in names}
    for split, metric, *vals in rows[1:]:
        for n, v in zip(names, vals):
            out[n].setdefault(split, {})[metric] = float(v)
    return out


def absolute_table_csv(columns: dict) -> str:
    """Average in-game metrics: rows are metrics, columns are ``{Split}_{Agent}``."""
    names = list(columns)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric"] + [f"{s.capitalize()}_{n}" for s in SPLITS for n in names])
    for row in ABSOLUTE_ROWS:
        w.writerow([row] + [_num(columns[n].get(s, {}).get(row, float("nan"))) for s in SPLITS
                            for n in names])
    return buf.getvalue()


def parse_absolute_table_csv(text: str) -> dict:
    rows = list(csv.reader(io.StringIO(text)))
    header = rows[0][1:]
    out: dict = {}
    for metric, *vals in rows[1:]:
        for h, v in zip(header, vals):
            split, _, name = h.partition("_")
            out.setdefault(name, {}).setdefault(split.lower(), {})[metric] = float(v)
    return out


def summary_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=True) + "\n"


def emit_tables(report: EvalReport, path, name: str = "agent") -> list:
    """Write ``jsd.csv``, ``averages.csv`` and ``summary.json`` for one report."""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        files = {
            "jsd.csv": jsd_table_csv({name: report}),
            "averages.csv": absolute_table_csv({name: report.averages}),
            "summary.json": summary_json({name: report.to_dict()}),
        }
        for fn, text in files.items():
            (path / fn).write_text(text)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return [path / fn for fn in files]


class IoFailure(OSError):
    pass
