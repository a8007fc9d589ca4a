"""Per-episode metric vectors, Gaussian normalization and the expert dataset."""
from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .env import COUNTERS, EventLog

METRIC_NAMES = (
    "shots",
    "stabs",
    "shots_taken",
    "stabs_taken",
    "shields",
    "heals",
    "empowered_shots",
)
M = len(METRIC_NAMES)
STD_FLOOR = 1e-6


class InsufficientData(ValueError):
    pass


def summarize(log: EventLog) -> np.ndarray:
    """The 7 episode counters in canonical order, as floats."""
    return np.array([getattr(log, k) for k in COUNTERS], dtype=float)


@dataclass
class NormalizationStats:
    mean: np.ndarray
    std: np.ndarray
    std_floor: float = STD_FLOOR

    def to_dict(self) -> dict:
        return {"mean": [float(v) for v in self.mean], "std": [float(v) for v in self.std],
                "std_floor": self.std_floor}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationStats":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float),
                   float(d["std_floor"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "NormalizationStats":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_normalizer(data, std_floor: float = STD_FLOOR) -> NormalizationStats:
    """Population mean/std per metric; accepts an ExpertDataset or an (n, M) array."""
    x = np.asarray(data.metrics if isinstance(data, ExpertDataset) else data, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InsufficientData("need at least 2 samples to fit a normalizer")
    mean = x.mean(axis=0)
    std = np.maximum(x.std(axis=0), std_floor)
    return NormalizationStats(mean=mean, std=std, std_floor=std_floor)


def normalize(m, stats: NormalizationStats) -> np.ndarray:
    return (np.asarray(m, dtype=float) - stats.mean) / stats.std


def denormalize(m, stats: NormalizationStats) -> np.ndarray:
    return np.asarray(m, dtype=float) * stats.std + stats.mean


@dataclass
class ExpertDataset:
    """Raw expert metric vectors with their level and split tags.

    ``styles`` is bookkeeping for synthetic data only; it is never written to the
    learner-facing CSV.
    """

    metrics: np.ndarray
    levels: np.ndarray
    splits: np.ndarray
    styles: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.metrics = np.asarray(self.metrics, dtype=float).reshape(-1, M)
        self.levels = np.asarray(self.levels, dtype=int)
        self.splits = np.asarray(self.splits, dtype=str)
        if len(self.metrics) == 0:
            raise InsufficientData("expert dataset is empty")
        if not set(self.splits) <= {"train", "test"}:
            raise ValueError("split tags must be 'train' or 'test'")
        train_lv = set(self.levels[self.splits == "train"])
        test_lv = set(self.levels[self.splits == "test"])
        if train_lv & test_lv:
            raise ValueError("a level appears in both train and test splits")

    def __len__(self):
        return len(self.metrics)

    def subset(self, split: str) -> "ExpertDataset":
        keep = self.splits == split
        return ExpertDataset(self.metrics[keep], self.levels[keep], self.splits[keep],
                             None if self.styles is None else self.styles[keep])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("level", "split") + METRIC_NAMES)
        for lv, sp, row in zip(self.levels, self.splits, self.metrics):
            w.writerow([int(lv), sp] + [_fmt(v) for v in row])
        return buf.getvalue()

    def styles_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("row", "style"))
        for i, s in enumerate(self.styles if self.styles is not None else []):
            w.writerow([i, s])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ExpertDataset":
        rows = list(csv.reader(io.StringIO(text)))
        header = tuple(rows[0])
        if header != ("level", "split") + METRIC_NAMES:
            raise ValueError(f"unexpected expert CSV header {header}")
        body = rows[1:]
        return cls(
            metrics=np.array([[float(v) for v in r[2:]] for r in body]),
            levels=np.array([int(r[0]) for r in body]),
            splits=np.array([r[1] for r in body]),
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def load(cls, path) -> "ExpertDataset":
        return cls.from_csv(Path(path).read_text())

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_csv().encode()).hexdigest()


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


# --------------------------------------------------------------------------
# Metrics not used for training (reporting only)
# --------------------------------------------------------------------------

EXTENDED_NAMES = (
    "avg_distance_between_heroes",
    "avg_distance_to_enemies",
    "heroes_pct_lost_hp",
    "enemies_pct_lost_hp",
    "win",
    "lose",
    "draw",
    "nb_turns",
)


def extended_metrics(log: EventLog) -> dict:
    """Positional and outcome statistics for one finished episode.

    Snapshots hold only units alive at the end of each turn, so a unit that dies
    during turn t does not contribute to turn t's distances.
    """
    hero_d, enemy_d = [], []
    for _, pos in log.snapshots:
        heroes = [p for uid, p in pos.items() if log.teams[uid] == "hero"]
        enemies = [p for uid, p in pos.items() if log.teams[uid] == "enemy"]
        pairs = [_euclid(a, b) for a, b in itertools.combinations(heroes, 2)]
        if pairs:
            hero_d.append(np.mean(pairs))
        cross = [_euclid(a, b) for a in heroes for b in enemies]
        if cross:
            enemy_d.append(np.mean(cross))

    def pct_lost(team):
        ids = [u for u, t in log.teams.items() if t == team]
        total = sum(log.max_hp[u] for u in ids)
        left = sum(log.final_hp.get(u, 0) for u in ids)
        return float(np.clip(100.0 * (total - left) / total, 0.0, 100.0)) if total else 0.0

    return {
        "avg_distance_between_heroes": float(np.mean(hero_d)) if hero_d else float("nan"),
        "avg_distance_to_enemies": float(np.mean(enemy_d)) if enemy_d else float("nan"),
        "heroes_pct_lost_hp": pct_lost("hero"),
        "enemies_pct_lost_hp": pct_lost("enemy"),
        "win": float(log.outcome == "win"),
        "lose": float(log.outcome == "lose"),
        "draw": float(log.outcome == "draw"),
        "nb_turns": float(log.turns_played),
    }


def _euclid(a, b) -> float:
    return float(np.hypot(a[0] - b[0], a[1] - b[1]))
