"""Synthetic heterogeneous experts: scripted play-styles rolled out on the train/test levels."""
from __future__ import annotations

import numpy as np

from . import env as E
from .config import RunConfig, level_range
from .summarize import ExpertDataset, extended_metrics, summarize

STYLE_BANK = (
    E.StyleParams(aggression=0.9, super_affinity=0.0, caution=0.1),    # brawler
    E.StyleParams(aggression=0.5, super_affinity=1.0, caution=0.4),    # support
    E.StyleParams(aggression=0.15, super_affinity=0.25, caution=0.95), # sniper
)


def make_styles(n: int, rng: np.random.Generator) -> list:
    """The first styles come from the bank; extra ones are drawn uniformly."""
    styles = list(STYLE_BANK[:n])
    while len(styles) < n:
        a, s, c = rng.uniform(0.0, 1.0, size=3)
        styles.append(E.StyleParams(float(a), float(s), float(c)))
    return styles


def levels_for(cfg: RunConfig) -> dict:
    return {
        "train": [E.generate_level(i, cfg.level_seed) for i in level_range(cfg.train_levels)],
        "test": [E.generate_level(i, cfg.level_seed) for i in level_range(cfg.test_levels)],
    }


def gen_experts(cfg: RunConfig, styles: int = None, episodes_per_style_per_level: int = None,
                seed: int = None):
    """Roll out every style on every level.

    Returns ``(dataset, extended)`` where ``extended`` is a list of
    extended-metric dicts aligned with the dataset rows (reporting only).
    """
    n_styles = cfg.styles if styles is None else styles
    per = cfg.episodes_per_style_per_level if episodes_per_style_per_level is None else episodes_per_style_per_level
    seed = cfg.expert_seed if seed is None else seed
    if n_styles < 2:
        raise ValueError("need at least 2 styles")
    rng = np.random.default_rng(seed)
    bank = make_styles(n_styles, rng)
    levels = levels_for(cfg)
    rows, lv, sp, st, ext = [], [], [], [], []
    for split, count in (("train", per), ("test", cfg.test_episodes_per_style)):
        for level in levels[split]:
            for si, style in enumerate(bank):
                for _ in range(count):
                    state, _ = E.play_episode(
                        level, lambda s, o, m: E.scripted_expert_policy(style, s, rng))
                    rows.append(summarize(state.log))
                    ext.append(extended_metrics(state.log))
                    lv.append(level.index)
                    sp.append(split)
                    st.append(si)
    data = ExpertDataset(np.array(rows), np.array(lv), np.array(sp), styles=np.array(st))
    return data, ext
