"""Goal-conditioned baseline with a fixed distance reward.

Each episode samples a goal ``z ~ N(0, I)`` in normalized metric space; the
terminal reward is ``-lambda * ||normalize(metrics) - z||_2``. It reuses the
policy substrate and the training loop but never touches the reward learner or
the density estimate.
"""
from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np

from . import env as E
from . import nn
from .config import RunConfig
from .policy import ReplayBuffer, Trajectory, make_policy
from .summarize import ExpertDataset, NormalizationStats, fit_normalizer, normalize


def carmi_reward(metrics, stats: NormalizationStats, goal, lam: float = 1.0) -> float:
    if lam <= 0:
        raise ValueError("lambda must be positive")
    diff = normalize(metrics, stats) - np.asarray(goal, dtype=float)
    return float(-lam * np.linalg.norm(diff))


def train_carmi(cfg: RunConfig, run_dir=None, expert: Optional[ExpertDataset] = None,
                evaluate: bool = True, with_baseline: bool = False):
    from . import trainer as T
    from .experts import levels_for

    cfg = cfg.replace(algorithm="carmi").validate()
    run_dir = Path(run_dir) if run_dir is not None else None
    if run_dir is not None:
        run_dir.mkdir(parents=True, exist_ok=True)
        cfg.save(run_dir / "config.snapshot")
    expert = T.prepare_experts(cfg, run_dir, expert)
    levels = levels_for(cfg)
    stats = fit_normalizer(expert.subset("train").metrics)
    if run_dir is not None:
        stats.save(run_dir / "stats.json")
    rngs = T.rng_streams(cfg.seed)
    pp = make_policy(E.obs_size(levels["train"][0]), rngs["policy_init"], hidden=(cfg.hidden, cfg.hidden),
                     actor_lr=cfg.actor_lr, critic_lr=cfg.critic_lr, latent_dim=cfg.latent_dim)

    def label(buffer: ReplayBuffer, traj: Trajectory, k: int, rec: dict) -> None:
        # goals are fixed per episode, so stored rewards never go stale
        traj.reward = carmi_reward(traj.metrics, stats, traj.z, cfg.carmi_lambda)

    train_log = T.JsonlLog(run_dir / "train_log.jsonl" if run_dir is not None else None)
    try:
        pp, steps, iters, history = T.training_loop(cfg, pp, levels["train"], stats, rngs, label, train_log)
    finally:
        train_log.close()
    if run_dir is not None:
        ck = run_dir / "checkpoints"
        ck.mkdir(exist_ok=True)
        nn.save_checkpoint(ck / "actor.ckpt", pp.actor_spec, pp.actor)
        nn.save_checkpoint(ck / "critic.ckpt", pp.critic_spec, pp.critic)
    art = T.RunArtifacts(run_dir=run_dir, config=cfg, report=None, env_steps=steps, iterations=iters,
                         d_updates=0, expert_hash=expert.content_hash(), policy=pp, history=history)
    if evaluate:
        T.finish_evaluation(art, expert, stats, levels, with_baseline)
    return art
